//! Gauss kernel on R^d and its time integral.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// `phi_n(x) = (2 pi n)^{-d/2} exp(-|x|^2 / (2n))` with `d = x.len()`.
#[inline]
pub fn phi(n: f64, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    phi_r2(n, r2, x.len())
}

#[inline]
pub fn phi_r2(n: f64, r2: f64, d: usize) -> f64 {
    (2.0 * PI * n).powf(-(d as f64) / 2.0) * (-r2 / (2.0 * n)).exp()
}

/// `Phi_n(x, y) = phi_n(x) + phi_n(y)`.
pub fn big_phi(n: f64, x: &[f64], y: &[f64]) -> f64 {
    phi(n, x) + phi(n, y)
}

const Q_EPS: f64 = 1e-8;

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `q_t(x) = int_0^t phi_s(x) ds`, integrated over `[1e-8, t]`.
///
/// The integrand vanishes to all orders as `s -> 0` when `x != 0`; at `x = 0`
/// the integral diverges in d = 2 and d = 3 and the point is rejected.
pub fn q_t(t: f64, x: &[f64]) -> Result<f64> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if r2 == 0.0 {
        return Err(Error::Domain("q_t(0) diverges in d = 2, 3".into()));
    }
    if t <= Q_EPS {
        return Ok(0.0);
    }
    let d = x.len();
    let f = move |s: f64| phi_r2(s, r2, d);
    // Split at the integrand's peak s = r^2/d so both halves are unimodal.
    let peak = (r2 / d as f64).clamp(Q_EPS, t);
    let scale = phi_r2(peak, r2, d) * t;
    let tol = 1e-13 * scale.max(1e-300);
    Ok(adaptive_simpson(&f, Q_EPS, peak, tol) + adaptive_simpson(&f, peak, t, tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_normalisation_and_value() {
        assert!((phi(1.0, &[0.0, 0.0]) - 1.0 / (2.0 * PI)).abs() < 1e-16);
        // Riemann sum over a fine grid integrates to one.
        let h = 0.05;
        let mut s = 0.0;
        for i in -200..=200 {
            for j in -200..=200 {
                s += phi(2.0, &[i as f64 * h, j as f64 * h]) * h * h;
            }
        }
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn phi_decreases_in_radius() {
        let mut prev = f64::INFINITY;
        for r in 0..40 {
            let v = phi(3.0, &[r as f64 * 0.25, 0.0, 0.0]);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn q_t_against_closed_form_d2() {
        // In d = 2, int_0^t phi_s(x) ds = E_1(|x|^2 / 2t) / (2 pi).
        fn e1(z: f64) -> f64 {
            // Series for the exponential integral, fine for moderate z.
            let mut sum = 0.0;
            let mut term = 1.0;
            for k in 1..200 {
                term *= -z / k as f64;
                sum -= term / k as f64;
            }
            -0.577_215_664_901_532_9 - z.ln() + sum
        }
        for &(t, r) in &[(1.0, 0.5), (2.0, 1.0), (0.5, 1.5)] {
            let q = q_t(t, &[r, 0.0]).unwrap();
            let exact = e1(r * r / (2.0 * t)) / (2.0 * PI);
            assert!((q - exact).abs() < 1e-10 * exact, "{q} vs {exact}");
        }
        assert!(q_t(1.0, &[0.0, 0.0]).is_err());
        assert!(q_t(1.0, &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn q_t_monotone_and_endpoint_bound() {
        for x in [[2.0, 1.0, 0.0], [1.0, 1.0, 1.0]] {
            let mut prev = 0.0;
            for i in 1..=10 {
                let t = 0.1 * i as f64;
                let q = q_t(t, &x).unwrap();
                assert!(q >= prev);
                let r2: f64 = x.iter().map(|v| v * v).sum();
                // The integrand increases on (0, t] here, so it is bounded by its endpoint.
                if r2 >= 3.0 * t {
                    assert!(q <= t * phi(t, &x) * (1.0 + 1e-12));
                }
                prev = q;
            }
        }
    }
}
