//! Lattice sites and the lazy nearest-neighbour walk on Z^d, d in {2, 3}.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

const BITS: u32 = 21;
const OFFSET: i64 = 1 << 20;
const MASK: u64 = (1 << BITS) - 1;

/// Largest absolute coordinate a [`Site`] can hold.
pub const MAX_COORD: i32 = (1 << 20) - 1;

/// A lattice point packed into one `u64`, 21 bits per axis.
///
/// The integer order of the packed key is lexicographic order on `(x, y, z)`,
/// which makes sorted iteration over sites well defined and cheap.
/// Two-dimensional sites keep `z = 0`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site(u64);

impl Site {
    pub const ORIGIN: Site = Site(((OFFSET as u64) << (2 * BITS)) | ((OFFSET as u64) << BITS) | OFFSET as u64);

    pub fn new(x: i32, y: i32, z: i32) -> Site {
        debug_assert!(x.abs() <= MAX_COORD && y.abs() <= MAX_COORD && z.abs() <= MAX_COORD);
        let enc = |c: i32| (c as i64 + OFFSET) as u64;
        Site((enc(x) << (2 * BITS)) | (enc(y) << BITS) | enc(z))
    }

    /// Builds a site from a 2- or 3-element coordinate slice.
    pub fn from_slice(c: &[i32]) -> Site {
        match c.len() {
            2 => Site::new(c[0], c[1], 0),
            3 => Site::new(c[0], c[1], c[2]),
            n => panic!("site needs 2 or 3 coordinates, got {n}"),
        }
    }

    pub fn coords(self) -> [i32; 3] {
        let dec = |v: u64| ((v & MASK) as i64 - OFFSET) as i32;
        [dec(self.0 >> (2 * BITS)), dec(self.0 >> BITS), dec(self.0)]
    }

    pub fn key(self) -> u64 {
        self.0
    }

    pub fn from_key(key: u64) -> Site {
        Site(key)
    }

    /// Translates by a packed displacement from [`Shift::new`].
    #[inline]
    pub fn shift(self, by: Shift) -> Site {
        Site(self.0.wrapping_add(by.0 as u64))
    }

    pub fn offset(self, other: Site) -> Site {
        let a = self.coords();
        let b = other.coords();
        Site::new(a[0] + b[0], a[1] + b[1], a[2] + b[2])
    }

    pub fn neg(self) -> Site {
        let a = self.coords();
        Site::new(-a[0], -a[1], -a[2])
    }

    pub fn norm2(self) -> i64 {
        self.coords().iter().map(|&c| c as i64 * c as i64).sum()
    }

    pub fn norm_inf(self) -> i32 {
        self.coords().iter().map(|c| c.abs()).max().unwrap()
    }

    /// Coordinates as floats, truncated to the first `d` axes.
    pub fn to_f64(self, d: usize) -> Vec<f64> {
        self.coords()[..d].iter().map(|&c| c as f64).collect()
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.coords();
        write!(f, "({}, {}, {})", c[0], c[1], c[2])
    }
}

/// A packed displacement, added to a site key with wrapping arithmetic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shift(i64);

impl Shift {
    pub fn new(dx: i32, dy: i32, dz: i32) -> Shift {
        Shift(((dx as i64) << (2 * BITS)) + ((dy as i64) << BITS) + dz as i64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkSpec {
    pub d: usize,
}

impl WalkSpec {
    pub fn new(d: usize) -> Result<WalkSpec> {
        if d == 2 || d == 3 {
            Ok(WalkSpec { d })
        } else {
            Err(Error::Param(format!("dimension must be 2 or 3, got {d}")))
        }
    }

    /// Number of moves, 2d + 1.
    pub fn n_moves(&self) -> usize {
        2 * self.d + 1
    }

    /// The moves in fixed order: stay, then +e_i, -e_i for each axis.
    pub fn moves(&self) -> Vec<[i32; 3]> {
        let mut out = vec![[0, 0, 0]];
        for i in 0..self.d {
            let mut p = [0; 3];
            p[i] = 1;
            out.push(p);
            let mut m = [0; 3];
            m[i] = -1;
            out.push(m);
        }
        out
    }

    pub fn shifts(&self) -> Vec<Shift> {
        self.moves().iter().map(|m| Shift::new(m[0], m[1], m[2])).collect()
    }

    pub fn step_prob(&self) -> f64 {
        1.0 / self.n_moves() as f64
    }

    /// sigma^2 = 2 / (2d + 1) as an exact fraction.
    pub fn walk_variance_ratio(&self) -> (u64, u64) {
        (2, self.n_moves() as u64)
    }

    pub fn walk_variance(&self) -> f64 {
        2.0 / self.n_moves() as f64
    }

    /// sqrt-scale spatial point, rounded to the nearest lattice site.
    pub fn round_site(&self, x: &[f64]) -> Site {
        let mut c = [0i32; 3];
        for i in 0..self.d {
            c[i] = x[i].round() as i32;
        }
        Site::new(c[0], c[1], c[2])
    }

    /// Iterates over all sites of the box `|x|_inf <= r` in key order.
    pub fn box_sites(&self, r: i32) -> Vec<Site> {
        let zr = if self.d == 3 { r } else { 0 };
        let mut out = Vec::new();
        for x in -r..=r {
            for y in -r..=r {
                for z in -zr..=zr {
                    out.push(Site::new(x, y, z));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_round_trips() {
        for &c in &[[0, 0, 0], [-5, 7, 0], [MAX_COORD, -MAX_COORD, 3], [1, -1, -1]] {
            assert_eq!(Site::new(c[0], c[1], c[2]).coords(), c);
        }
    }

    #[test]
    fn key_order_is_lexicographic() {
        let mut v = vec![Site::new(1, -3, 0), Site::new(-1, 5, 2), Site::new(1, -4, 9), Site::new(-1, 5, -2)];
        v.sort();
        let c: Vec<_> = v.iter().map(|s| s.coords()).collect();
        assert_eq!(c, vec![[-1, 5, -2], [-1, 5, 2], [1, -4, 9], [1, -3, 0]]);
    }

    #[test]
    fn shifts_match_coordinate_addition() {
        let spec = WalkSpec::new(3).unwrap();
        let s = Site::new(-2, 0, 5);
        for (m, sh) in spec.moves().iter().zip(spec.shifts()) {
            assert_eq!(s.shift(sh).coords(), [-2 + m[0], m[1], 5 + m[2]]);
        }
        assert_eq!(Site::new(0, 0, 0).shift(Shift::new(-1, -1, -1)).coords(), [-1, -1, -1]);
    }

    #[test]
    fn walk_probabilities() {
        for d in [2, 3] {
            let w = WalkSpec::new(d).unwrap();
            assert_eq!(w.moves().len(), 2 * d + 1);
            let total: f64 = (0..w.n_moves()).map(|_| w.step_prob()).sum();
            assert!((total - 1.0).abs() < 1e-15);
            // Second moment of one coordinate of a single step.
            let (num, den) = w.walk_variance_ratio();
            let m2: i32 = w.moves().iter().map(|m| m[0] * m[0]).sum();
            assert_eq!((m2 as u64) * den, num * w.n_moves() as u64);
        }
        assert!(WalkSpec::new(4).is_err());
    }
}
