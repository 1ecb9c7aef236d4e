//! Dense real-valued functions on axis-aligned lattice boxes.

use crate::lattice::Site;
use serde::{Deserialize, Serialize};

/// A real function on the box `lo[i] <= x_i < lo[i] + ext[i]`, zero outside.
///
/// Values are stored row-major with the last axis fastest. In two dimensions
/// the third axis is degenerate (`lo[2] = 0`, `ext[2] = 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    pub d: usize,
    pub lo: [i32; 3],
    pub ext: [usize; 3],
    pub data: Vec<f64>,
}

/// Kahan-Babuska summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for v in it {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

#[inline]
fn sort3(a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let (a, b) = (a.min(b), a.max(b));
    let (b, c) = (b.min(c), b.max(c));
    let (a, b) = (a.min(b), a.max(b));
    (a, b, c)
}

impl BoxGrid {
    pub fn zeros(d: usize, lo: [i32; 3], ext: [usize; 3]) -> BoxGrid {
        let mut lo = lo;
        let mut ext = ext;
        if d == 2 {
            lo[2] = 0;
            ext[2] = 1;
        }
        let n = ext[0] * ext[1] * ext[2];
        BoxGrid { d, lo, ext, data: vec![0.0; n] }
    }

    /// The box `|x|_inf <= r` centred at the origin.
    pub fn centered(d: usize, r: i32) -> BoxGrid {
        let e = (2 * r + 1) as usize;
        BoxGrid::zeros(d, [-r, -r, -r], [e, e, e])
    }

    /// Point mass of weight `v` at the origin.
    pub fn delta(d: usize, v: f64) -> BoxGrid {
        let mut g = BoxGrid::centered(d, 0);
        g.data[0] = v;
        g
    }

    pub fn hi(&self) -> [i32; 3] {
        [
            self.lo[0] + self.ext[0] as i32 - 1,
            self.lo[1] + self.ext[1] as i32 - 1,
            self.lo[2] + self.ext[2] as i32 - 1,
        ]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, c: [i32; 3]) -> Option<usize> {
        let mut idx = 0usize;
        for i in 0..3 {
            let off = c[i] - self.lo[i];
            if off < 0 || off as usize >= self.ext[i] {
                return None;
            }
            idx = idx * self.ext[i] + off as usize;
        }
        Some(idx)
    }

    pub fn coords_of(&self, mut idx: usize) -> [i32; 3] {
        let mut c = [0i32; 3];
        for i in (0..3).rev() {
            c[i] = self.lo[i] + (idx % self.ext[i]) as i32;
            idx /= self.ext[i];
        }
        c
    }

    #[inline]
    pub fn get(&self, c: [i32; 3]) -> f64 {
        self.index(c).map_or(0.0, |i| self.data[i])
    }

    #[inline]
    pub fn at(&self, s: Site) -> f64 {
        self.get(s.coords())
    }

    /// Adds `v` at `c`; panics if `c` is outside the box.
    pub fn add(&mut self, c: [i32; 3], v: f64) {
        let i = self.index(c).expect("point outside grid");
        self.data[i] += v;
    }

    pub fn set(&mut self, c: [i32; 3], v: f64) {
        let i = self.index(c).expect("point outside grid");
        self.data[i] = v;
    }

    pub fn iter(&self) -> impl Iterator<Item = ([i32; 3], f64)> + '_ {
        self.data.iter().enumerate().map(|(i, &v)| (self.coords_of(i), v))
    }

    pub fn sum(&self) -> f64 {
        compensated_sum(self.data.iter().copied())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> BoxGrid {
        BoxGrid { data: self.data.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    /// Smallest box containing both, zero-filled, with `self` copied in.
    pub fn union_box(&self, other: &BoxGrid) -> BoxGrid {
        let ahi = self.hi();
        let bhi = other.hi();
        let mut lo = [0; 3];
        let mut ext = [0; 3];
        for i in 0..3 {
            lo[i] = self.lo[i].min(other.lo[i]);
            ext[i] = (ahi[i].max(bhi[i]) - lo[i] + 1) as usize;
        }
        self.resized(lo, ext)
    }

    /// A copy on a different box; values outside the new box are dropped.
    pub fn resized(&self, lo: [i32; 3], ext: [usize; 3]) -> BoxGrid {
        let mut out = BoxGrid::zeros(self.d, lo, ext);
        let hi = out.hi();
        for a in self.lo[0].max(out.lo[0])..=self.hi()[0].min(hi[0]) {
            for b in self.lo[1].max(out.lo[1])..=self.hi()[1].min(hi[1]) {
                let z0 = self.lo[2].max(out.lo[2]);
                let z1 = self.hi()[2].min(hi[2]);
                if z0 > z1 {
                    continue;
                }
                let src = self.index([a, b, z0]).unwrap();
                let dst = out.index([a, b, z0]).unwrap();
                let n = (z1 - z0 + 1) as usize;
                out.data[dst..dst + n].copy_from_slice(&self.data[src..src + n]);
            }
        }
        out
    }

    /// Grows the box by `m` in every active direction.
    pub fn expanded(&self, m: i32) -> BoxGrid {
        let mut lo = self.lo;
        let mut ext = self.ext;
        for i in 0..self.d {
            lo[i] -= m;
            ext[i] += 2 * m as usize;
        }
        self.resized(lo, ext)
    }

    /// Pointwise `self + a * other` on the union box.
    pub fn axpy(&self, a: f64, other: &BoxGrid) -> BoxGrid {
        let mut out = self.union_box(other);
        for (i, &v) in other.data.iter().enumerate() {
            if v != 0.0 {
                let c = other.coords_of(i);
                out.add(c, a * v);
            }
        }
        out
    }

    /// Drops outer shells that are exactly zero (centred boxes only), then
    /// crops to radius `cap` if given.
    pub fn trimmed_centered(&self, cap: Option<i32>) -> BoxGrid {
        let mut r = (self.ext[0] as i32 - 1) / 2;
        debug_assert_eq!(self.lo[0], -r);
        if let Some(c) = cap {
            r = r.min(c);
        }
        while r > 0 && self.shell_is_zero(r) {
            r -= 1;
        }
        let e = (2 * r + 1) as usize;
        if e == self.ext[0] {
            return self.clone();
        }
        self.resized([-r, -r, -r], [e, e, e])
    }

    fn shell_is_zero(&self, r: i32) -> bool {
        let zr = if self.d == 3 { r } else { 0 };
        for a in -r..=r {
            for b in -r..=r {
                for c in -zr..=zr {
                    let on_shell = a.abs() == r || b.abs() == r || c.abs() == r;
                    if on_shell && self.get([a, b, c]) != 0.0 {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// One application of the walk operator: `out(x) = avg_e self(x + e)`.
    ///
    /// The output box is one larger in every active direction. Opposite
    /// neighbours are summed in pairs and the pair sums are added in sorted
    /// order, so the result inherits every lattice symmetry of the input
    /// exactly, not just up to rounding.
    pub fn stencil_step(&self) -> BoxGrid {
        let d = self.d;
        let inv = (2 * d + 1) as f64;
        let pad = self.expanded(2);
        let mut out = self.expanded(1);
        out.data.iter_mut().for_each(|v| *v = 0.0);
        let (p1, p2) = (pad.ext[1], pad.ext[2]);
        if d == 2 {
            let (o0, o1) = (out.ext[0], out.ext[1]);
            for a in 0..o0 {
                let up = &pad.data[a * p1..(a + 1) * p1];
                let mid = &pad.data[(a + 1) * p1..(a + 2) * p1];
                let dn = &pad.data[(a + 2) * p1..(a + 3) * p1];
                let row = &mut out.data[a * o1..(a + 1) * o1];
                for b in 0..o1 {
                    let c = mid[b + 1];
                    let s0 = up[b + 1] + dn[b + 1];
                    let s1 = mid[b] + mid[b + 2];
                    let lo = s0.min(s1);
                    let hi = s0.max(s1);
                    row[b] = ((c + lo) + hi) / inv;
                }
            }
        } else {
            let (o0, o1, o2) = (out.ext[0], out.ext[1], out.ext[2]);
            let plane = p1 * p2;
            let at = |a: usize, b: usize, c: usize| a * plane + b * p2 + c;
            for a in 0..o0 {
                for b in 0..o1 {
                    let base = (a * o1 + b) * o2;
                    let row = &mut out.data[base..base + o2];
                    let m = at(a + 1, b + 1, 0);
                    let xm = at(a, b + 1, 0);
                    let xp = at(a + 2, b + 1, 0);
                    let ym = at(a + 1, b, 0);
                    let yp = at(a + 1, b + 2, 0);
                    let pd = &pad.data;
                    for c in 0..o2 {
                        let ctr = pd[m + c + 1];
                        let s0 = pd[xm + c + 1] + pd[xp + c + 1];
                        let s1 = pd[ym + c + 1] + pd[yp + c + 1];
                        let s2 = pd[m + c] + pd[m + c + 2];
                        let (l, md, h) = sort3(s0, s1, s2);
                        row[c] = (((ctr + l) + md) + h) / inv;
                    }
                }
            }
        }
        out
    }

    /// Full discrete convolution `(self * other)(x) = sum_y self(y) other(x - y)`.
    pub fn convolve(&self, other: &BoxGrid) -> BoxGrid {
        let mut lo = [0; 3];
        let mut ext = [0; 3];
        for i in 0..3 {
            lo[i] = self.lo[i] + other.lo[i];
            ext[i] = self.ext[i] + other.ext[i] - 1;
        }
        let mut out = BoxGrid::zeros(self.d, lo, ext);
        for (i, &a) in self.data.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let ca = self.coords_of(i);
            for x in 0..other.ext[0] {
                for y in 0..other.ext[1] {
                    let src = (x * other.ext[1] + y) * other.ext[2];
                    let c = [ca[0] + other.lo[0] + x as i32, ca[1] + other.lo[1] + y as i32, ca[2] + other.lo[2]];
                    let dst = out.index(c).unwrap();
                    let n = other.ext[2];
                    for (o, s) in out.data[dst..dst + n].iter_mut().zip(&other.data[src..src + n]) {
                        *o += a * s;
                    }
                }
            }
        }
        out
    }

    /// Multilinear interpolation at a real point (first `d` coordinates used).
    pub fn interp(&self, x: &[f64]) -> f64 {
        let d = self.d;
        let mut base = [0i32; 3];
        let mut frac = [0.0f64; 3];
        for i in 0..d {
            let f = x[i].floor();
            base[i] = f as i32;
            frac[i] = x[i] - f;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut c = base;
            for i in 0..d {
                if corner >> i & 1 == 1 {
                    c[i] += 1;
                    w *= frac[i];
                } else {
                    w *= 1.0 - frac[i];
                }
            }
            if w != 0.0 {
                acc += w * self.get(c);
            }
        }
        acc
    }
}
