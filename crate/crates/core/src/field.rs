//! Sparse non-negative integer fields on the lattice.

use crate::error::{Error, Result};
use crate::grid::BoxGrid;
use crate::lattice::Site;
use rustc_hash::FxHashMap;
use std::io::{BufRead, Write};

/// Site -> count with zero-count sites absent and the total mass cached.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LatticeField {
    d: usize,
    counts: FxHashMap<Site, u64>,
    total: u64,
}

impl LatticeField {
    pub fn new(d: usize) -> LatticeField {
        LatticeField { d, counts: FxHashMap::default(), total: 0 }
    }

    pub fn with_capacity(d: usize, cap: usize) -> LatticeField {
        let mut counts = FxHashMap::default();
        counts.reserve(cap);
        LatticeField { d, counts, total: 0 }
    }

    /// `n` particles at the origin.
    pub fn point(d: usize, n: u64) -> LatticeField {
        let mut f = LatticeField::new(d);
        f.add(Site::ORIGIN, n);
        f
    }

    pub fn from_pairs(d: usize, pairs: impl IntoIterator<Item = (Site, u64)>) -> LatticeField {
        let mut f = LatticeField::new(d);
        for (s, c) in pairs {
            f.add(s, c);
        }
        f
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Number of occupied sites.
    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    #[inline]
    pub fn get(&self, s: Site) -> u64 {
        self.counts.get(&s).copied().unwrap_or(0)
    }

    #[inline]
    pub fn add(&mut self, s: Site, n: u64) {
        if n > 0 {
            *self.counts.entry(s).or_insert(0) += n;
            self.total += n;
        }
    }

    pub fn set(&mut self, s: Site, n: u64) {
        let old = if n == 0 { self.counts.remove(&s).unwrap_or(0) } else { self.counts.insert(s, n).unwrap_or(0) };
        self.total = self.total - old + n;
    }

    /// Unordered iteration; use [`LatticeField::sorted`] when order matters.
    pub fn iter(&self) -> impl Iterator<Item = (Site, u64)> + '_ {
        self.counts.iter().map(|(&s, &c)| (s, c))
    }

    pub fn sorted(&self) -> Vec<(Site, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by_key(|p| p.0);
        v
    }

    pub fn max_count(&self) -> u64 {
        self.counts.values().copied().max().unwrap_or(0)
    }

    /// Largest Euclidean norm of an occupied site.
    pub fn support_radius(&self) -> f64 {
        self.counts.keys().map(|s| (s.norm2() as f64).sqrt()).fold(0.0, f64::max)
    }

    pub fn support_radius_inf(&self) -> i32 {
        self.counts.keys().map(|s| s.norm_inf()).max().unwrap_or(0)
    }

    /// Integer-valued copy as a dense grid over the bounding box.
    pub fn to_grid(&self) -> BoxGrid {
        if self.is_empty() {
            return BoxGrid::zeros(self.d, [0; 3], [0, 0, 0]);
        }
        let mut lo = [i32::MAX; 3];
        let mut hi = [i32::MIN; 3];
        for s in self.counts.keys() {
            let c = s.coords();
            for i in 0..3 {
                lo[i] = lo[i].min(c[i]);
                hi[i] = hi[i].max(c[i]);
            }
        }
        let ext = [(hi[0] - lo[0] + 1) as usize, (hi[1] - lo[1] + 1) as usize, (hi[2] - lo[2] + 1) as usize];
        let mut g = BoxGrid::zeros(self.d, lo, ext);
        for (s, c) in self.iter() {
            g.add(s.coords(), c as f64);
        }
        g
    }

    /// `sum_x self(x) f(x)` accumulated in key order.
    pub fn pair_with(&self, mut f: impl FnMut(Site) -> f64) -> f64 {
        self.sorted().into_iter().map(|(s, c)| c as f64 * f(s)).sum()
    }

    /// Writes `x,y[,z],count` rows sorted by site.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        if self.d == 2 {
            writeln!(w, "x,y,count")?;
        } else {
            writeln!(w, "x,y,z,count")?;
        }
        for (s, n) in self.sorted() {
            let c = s.coords();
            if self.d == 2 {
                writeln!(w, "{},{},{}", c[0], c[1], n)?;
            } else {
                writeln!(w, "{},{},{},{}", c[0], c[1], c[2], n)?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(d: usize, r: R) -> Result<LatticeField> {
        let mut f = LatticeField::new(d);
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != d + 1 {
                return Err(Error::Param(format!("line {}: expected {} columns", i + 1, d + 1)));
            }
            let bad = |e: std::num::ParseIntError| Error::Param(format!("line {}: {e}", i + 1));
            let mut c = [0i32; 3];
            for k in 0..d {
                c[k] = parts[k].parse().map_err(bad)?;
            }
            let n: u64 = parts[d].parse().map_err(bad)?;
            f.add(Site::new(c[0], c[1], c[2]), n);
        }
        Ok(f)
    }
}

/// `k^{-1} sum_x field(x) psi(x / sqrt k)`.
pub fn feller_pair(field: &LatticeField, k: u64, psi: impl Fn(&[f64]) -> f64) -> f64 {
    let sk = (k as f64).sqrt();
    let d = field.d();
    let mut buf = [0.0f64; 3];
    field.pair_with(|s| {
        let c = s.coords();
        for i in 0..d {
            buf[i] = c[i] as f64 / sk;
        }
        psi(&buf[..d])
    }) / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_is_cached_and_zero_sites_dropped() {
        let mut f = LatticeField::new(2);
        f.add(Site::new(1, 2, 0), 3);
        f.add(Site::new(1, 2, 0), 2);
        f.add(Site::new(0, 0, 0), 0);
        assert_eq!(f.total(), 5);
        assert_eq!(f.support_size(), 1);
        f.set(Site::new(1, 2, 0), 0);
        assert!(f.is_empty());
        assert_eq!(f.support_size(), 0);
    }

    #[test]
    fn feller_pair_examples() {
        let f = LatticeField::point(2, 9);
        assert_eq!(feller_pair(&f, 9, |x| 1.0 + x[0] + 7.0 * x[1]), 1.0);
        let g = LatticeField::from_pairs(2, [(Site::new(2, 0, 0), 1)]);
        assert_eq!(feller_pair(&g, 4, |x| x[0]), 0.25);
        assert_eq!(feller_pair(&LatticeField::new(3), 4, |_| 1.0), 0.0);
    }

    #[test]
    fn csv_round_trip_is_sorted() {
        let f = LatticeField::from_pairs(3, [(Site::new(1, 0, 0), 2), (Site::new(-1, 4, 2), 1), (Site::new(-1, 4, -2), 7)]);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "x,y,z,count\n-1,4,-2,7\n-1,4,2,1\n1,0,0,2\n");
        assert_eq!(LatticeField::read_csv(3, &buf[..]).unwrap(), f);
    }
}
