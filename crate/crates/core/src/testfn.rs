//! Test functions on R^d.

use std::fmt;
use std::sync::Arc;

type Func = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A real function on R^d with optional compact support and a sup-norm bound.
#[derive(Clone)]
pub struct TestFn {
    f: Func,
    support: Option<f64>,
    sup: f64,
    name: String,
}

impl fmt::Debug for TestFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFn({})", self.name)
    }
}

impl TestFn {
    /// `support` is a Euclidean radius outside which `f` vanishes.
    pub fn new(name: &str, support: Option<f64>, sup: f64, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> TestFn {
        TestFn { f: Arc::new(f), support, sup, name: name.to_string() }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn zero() -> TestFn {
        TestFn::new("zero", Some(0.0), 0.0, |_| 0.0)
    }

    pub fn constant(c: f64) -> TestFn {
        TestFn::new("constant", None, c.abs(), move |_| c)
    }

    /// `h (1 - |x|^2 / r^2)_+`.
    pub fn bump(r: f64, h: f64) -> TestFn {
        TestFn::new("bump", Some(r), h.abs(), move |x| {
            let s: f64 = x.iter().map(|v| v * v).sum::<f64>() / (r * r);
            if s < 1.0 { h * (1.0 - s) } else { 0.0 }
        })
    }

    /// `(1 - |x|^2 / r^2)_+^3`, twice continuously differentiable.
    pub fn smooth_bump(r: f64) -> TestFn {
        TestFn::new("smooth_bump", Some(r), 1.0, move |x| {
            let s: f64 = x.iter().map(|v| v * v).sum::<f64>() / (r * r);
            if s < 1.0 { (1.0 - s).powi(3) } else { 0.0 }
        })
    }

    /// `|x|^2`, unbounded and without compact support.
    pub fn square_norm() -> TestFn {
        TestFn::new("square_norm", None, f64::INFINITY, |x| x.iter().map(|v| v * v).sum())
    }
}
