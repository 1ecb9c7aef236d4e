//! Binary cache for [`KernelTable`].
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    b"BRWK"
//! version  u32 = 1
//! endian   u32 = 0x01020304 (written little-endian)
//! d        u32
//! n_max    u64
//! per step i = 0..=n_max:
//!   radius u32            stored box is |x|_inf <= radius
//!   values (2r+1)^d f64   row-major, last axis fastest, little-endian
//! ```

use super::KernelTable;
use crate::error::{Error, Result};
use crate::grid::BoxGrid;
use crate::lattice::WalkSpec;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"BRWK";
const VERSION: u32 = 1;
const ENDIAN_TAG: u32 = 0x0102_0304;

pub fn write_table<W: Write>(table: &KernelTable, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&ENDIAN_TAG.to_le_bytes())?;
    w.write_all(&(table.d() as u32).to_le_bytes())?;
    w.write_all(&(table.n_max() as u64).to_le_bytes())?;
    for g in table.steps() {
        let r = (g.ext[0] - 1) / 2;
        w.write_all(&(r as u32).to_le_bytes())?;
        for v in &g.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_table<R: Read>(mut r: R) -> Result<KernelTable> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Cache(format!("unsupported version {version}")));
    }
    if read_u32(&mut r)? != ENDIAN_TAG {
        return Err(Error::Cache("endianness tag mismatch".into()));
    }
    let d = read_u32(&mut r)? as usize;
    let spec = WalkSpec::new(d).map_err(|e| Error::Cache(e.to_string()))?;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n_max = u64::from_le_bytes(b8) as usize;
    let mut steps = Vec::with_capacity(n_max + 1);
    for i in 0..=n_max {
        let rad = read_u32(&mut r)? as i32;
        if rad as usize > i {
            return Err(Error::Cache(format!("step {i} has radius {rad}")));
        }
        let mut g = BoxGrid::centered(d, rad);
        for v in g.data.iter_mut() {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        steps.push(g);
    }
    Ok(KernelTable::from_steps(spec, steps))
}

pub fn save(table: &KernelTable, path: &Path) -> Result<()> {
    write_table(table, BufWriter::new(File::create(path)?))
}

pub fn load(path: &Path) -> Result<KernelTable> {
    read_table(BufReader::new(File::open(path)?))
}

/// Loads the table from `path` if it holds a table for `spec` reaching
/// `n_max`, otherwise builds one and writes it there.
pub fn load_or_build(spec: WalkSpec, n_max: usize, path: &Path) -> Result<KernelTable> {
    if path.exists() {
        if let Ok(t) = load(path) {
            if t.d() == spec.d && t.n_max() >= n_max {
                return Ok(t);
            }
        }
    }
    let t = KernelTable::build(spec, n_max)?;
    save(&t, path)?;
    Ok(t)
}
