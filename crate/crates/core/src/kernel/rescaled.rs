//! The rescaled Green convolution `Psi^k_t(x) = sum_y psi(y/sqrt k) G_{kt}(sqrt k x - y) / k`.

use super::KernelTable;
use crate::error::{Error, Result};
use crate::grid::BoxGrid;
use crate::testfn::TestFn;

#[derive(Clone, Debug)]
pub struct RescaledGreen {
    k: u64,
    t: f64,
    sup: f64,
    lattice: BoxGrid,
}

impl RescaledGreen {
    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Values at the lattice points `z`, i.e. at `x = z / sqrt k`.
    pub fn lattice_values(&self) -> &BoxGrid {
        &self.lattice
    }

    /// `Psi^k_t(x)`, multilinearly interpolated between lattice points.
    ///
    /// Panics if the value breaks `|Psi^k_t| <= M t`, which holds for every
    /// input because `sum_z G_n(z) = n`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let sk = (self.k as f64).sqrt();
        let z: Vec<f64> = x.iter().map(|v| v * sk).collect();
        let v = self.lattice.interp(&z);
        assert!(v.abs() <= self.sup * self.t * (1.0 + 1e-12) + 1e-300, "|Psi| = {} exceeds M t = {}", v.abs(), self.sup * self.t);
        v
    }
}

/// Builds `Psi^k_t` for `psi` with compact support; `k t` must be an integer.
pub fn rescaled_green_test(table: &KernelTable, psi: &TestFn, k: u64, t: f64) -> Result<RescaledGreen> {
    let kt = k as f64 * t;
    if (kt - kt.round()).abs() > 1e-9 || kt < 0.0 {
        return Err(Error::Param(format!("k t = {kt} is not a non-negative integer")));
    }
    let n = kt.round() as usize;
    let radius = psi.support_radius().ok_or_else(|| Error::Param("psi needs compact support".into()))?;
    let d = table.d();
    let sk = (k as f64).sqrt();
    let green = table.green(n)?;
    let r = (radius * sk).ceil() as i32;
    let mut psi_grid = BoxGrid::centered(d, r);
    let mut buf = [0.0; 3];
    for i in 0..psi_grid.len() {
        let c = psi_grid.coords_of(i);
        for a in 0..d {
            buf[a] = c[a] as f64 / sk;
        }
        psi_grid.data[i] = psi.eval(&buf[..d]);
    }
    let mut lattice = psi_grid.convolve(&green);
    lattice.scale(1.0 / k as f64);
    Ok(RescaledGreen { k, t, sup: psi.sup_norm(), lattice })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::WalkSpec;

    #[test]
    fn zero_psi_gives_zero() {
        let t = KernelTable::build(WalkSpec::new(2).unwrap(), 8).unwrap();
        let g = rescaled_green_test(&t, &TestFn::zero(), 16, 0.5).unwrap();
        assert_eq!(g.eval(&[0.3, -0.1]), 0.0);
    }

    #[test]
    fn rejects_fractional_horizon() {
        let t = KernelTable::build(WalkSpec::new(2).unwrap(), 8).unwrap();
        assert!(rescaled_green_test(&t, &TestFn::bump(1.0, 1.0), 16, 0.3).is_err());
    }
}
