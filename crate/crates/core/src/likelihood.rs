//! Likelihood ratio of the modified epidemic against its Poisson branching
//! envelope, the discrete martingale functional, and an importance-sampling
//! cross-check between the two simulators.

use crate::brw::{brw_run, lambda_field, OffspringLaw, Trajectory, DEFAULT_GUARD};
use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::grid::compensated_sum;
use crate::lattice::{Site, WalkSpec};
use crate::rng::StreamSeed;
use crate::sir::{kappa, sir_observe, Coloring};
use crate::stats::{two_sample_z, Welford};
use crate::testfn::TestFn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Terms of `log dQ/dP` along one envelope trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodBreakdown {
    /// Non-zero log-factors `(t, x, log factor)` in `(t, x)` order.
    pub factors: Vec<(usize, Site, f64)>,
    pub log_lr: f64,
    /// `sum Delta rho` with `Delta = (X - lambda) / N^alpha`, `rho = R / N^(1-alpha)`.
    pub s1: f64,
    /// `(1/2) sum Delta^2 rho^2`.
    pub s2: f64,
    /// `log_lr + s1 + s2`.
    pub epsilon: f64,
}

impl LikelihoodBreakdown {
    pub fn lr(&self) -> f64 {
        self.log_lr.exp()
    }
}

/// `[p(y|l)(1 - k(y)) + p(y+1|l) k(y+1)] / p(y|l) = (1 - k(y)) + l k(y+1) / (y+1)`.
#[inline]
pub fn lr_factor(y: u64, lambda: f64, r: u64, n: u64) -> f64 {
    (1.0 - kappa(y, r, n)) + lambda * kappa(y + 1, r, n) / (y + 1) as f64
}

/// Likelihood ratio of a Poisson-envelope trajectory under the modified
/// epidemic with village size `n`.
pub fn log_lr(traj: &Trajectory, n: u64, alpha: f64) -> Result<LikelihoodBreakdown> {
    let d = traj.d();
    let na = (n as f64).powf(alpha);
    let n1a = (n as f64).powf(1.0 - alpha);
    let mut recovered = LatticeField::new(d);
    let mut factors = Vec::new();
    let mut s1 = Vec::new();
    let mut s2 = Vec::new();
    for t in 1..=traj.horizon() {
        for (s, c) in traj.x(t - 1).iter() {
            recovered.add(s, c);
        }
        let cur = traj.x(t);
        let lam = lambda_field(traj.x(t - 1));
        for (s, y) in cur.sorted() {
            if lam.binary_search_by_key(&s, |p| p.0).is_err() {
                return Err(Error::ImpossiblePath { t, site: s.coords(), y });
            }
        }
        for (s, l) in lam {
            let y = cur.get(s);
            let r = recovered.get(s);
            if r == 0 {
                continue;
            }
            let f = lr_factor(y, l, r, n);
            if f != 1.0 {
                factors.push((t, s, f.ln()));
            }
            let delta = (y as f64 - l) / na;
            let rho = r as f64 / n1a;
            s1.push(delta * rho);
            s2.push(0.5 * delta * delta * rho * rho);
        }
    }
    let log_lr = compensated_sum(factors.iter().map(|f| f.2));
    let s1 = compensated_sum(s1);
    let s2 = compensated_sum(s2);
    Ok(LikelihoodBreakdown { factors, log_lr, s1, s2, epsilon: log_lr + s1 + s2 })
}

/// `A_k psi(x) = [sum_e psi(x + e/sqrt k) - (2d+1) psi(x)] k / (2d+1)`.
pub fn a_k(psi: &TestFn, k: f64, x: &[f64]) -> f64 {
    let d = x.len();
    let h = 1.0 / k.sqrt();
    let mut y = x.to_vec();
    let mut sum = 0.0;
    let moves = WalkSpec { d }.moves();
    for m in moves {
        for i in 0..d {
            y[i] = x[i] + m[i] as f64 * h;
        }
        sum += psi.eval(&y);
    }
    (sum - (2 * d + 1) as f64 * psi.eval(x)) * k / (2 * d + 1) as f64
}

fn pair_scaled(x: &LatticeField, k: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
    let d = x.d();
    let s = k.sqrt();
    compensated_sum(x.sorted().into_iter().map(|(site, c)| {
        let p = site.to_f64(d);
        let y: Vec<f64> = p.iter().map(|v| v / s).collect();
        c as f64 * f(&y)
    })) / k
}

/// `M_g = <F_k X_g, psi> - <F_k X_0, psi> - sum_{s<g} <F_k X_s, A_k psi> / k`
/// for every generation `g` of the trajectory (macroscopic time `g / k`).
pub fn martingale_functional(traj: &Trajectory, psi: &TestFn, k: u64) -> Vec<f64> {
    let kf = k as f64;
    let base = pair_scaled(traj.x(0), kf, |y| psi.eval(y));
    let mut out = Vec::with_capacity(traj.horizon() + 1);
    let mut drift = 0.0;
    for g in 0..=traj.horizon() {
        out.push(pair_scaled(traj.x(g), kf, |y| psi.eval(y)) - base - drift);
        drift += pair_scaled(traj.x(g), kf, |y| a_k(psi, kf, y)) / kf;
    }
    out
}

/// A bounded functional of a trajectory.
pub type TrajFn = dyn Fn(&Trajectory) -> f64 + Send + Sync;

/// One side-by-side comparison of `E_Q f` and `E_P f dQ/dP`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceResult {
    pub id: String,
    pub n: u64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// `None` when both samples are degenerate and equal.
    pub z: Option<f64>,
}

impl ImportanceResult {
    pub const CSV_HEADER: &'static str = "functional,N,lhs,rhs,z";

    pub fn csv_row(&self) -> String {
        let z = self.z.map_or("degenerate".to_string(), |z| format!("{z}"));
        format!("{},{},{},{},{}", self.id, self.n, self.lhs, self.rhs, z)
    }

    pub fn passes(&self, limit: f64) -> bool {
        self.z.is_none_or(|z| z.abs() <= limit)
    }
}

/// Runs `reps` modified-epidemic replicates (Poisson arrivals) and `reps`
/// envelope replicates, evaluating every functional on each run.
pub fn importance_battery(
    fs: &[(&str, &TrajFn)],
    mu: &LatticeField,
    n: u64,
    alpha: f64,
    horizon: usize,
    reps: u64,
    seed: StreamSeed,
) -> Result<Vec<ImportanceResult>> {
    let law = OffspringLaw::PoissonUnit;
    let q_seed = seed.fork(1).master;
    let p_seed = seed.fork(2).master;
    let lhs: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut fields = Vec::with_capacity(horizon + 1);
            sir_observe(mu, n, Coloring::Modified, &law, horizon, StreamSeed::new(q_seed, r), |st| {
                fields.push(st.red.clone());
                true
            })?;
            let traj = Trajectory::from_fields(fields);
            Ok(fs.iter().map(|f| (f.1)(&traj)).collect())
        })
        .collect::<Result<_>>()?;
    let rhs: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let traj = brw_run(mu, &law, horizon, StreamSeed::new(p_seed, r), DEFAULT_GUARD)?;
            let lr = log_lr(&traj, n, alpha)?.lr();
            Ok(fs.iter().map(|f| (f.1)(&traj) * lr).collect())
        })
        .collect::<Result<_>>()?;
    Ok(fs
        .iter()
        .enumerate()
        .map(|(i, (id, _))| {
            let a: Welford = lhs.iter().map(|v| v[i]).collect();
            let b: Welford = rhs.iter().map(|v| v[i]).collect();
            ImportanceResult { id: id.to_string(), n, lhs: a.mean(), lhs_se: a.se(), rhs: b.mean(), rhs_se: b.se(), z: two_sample_z(&a, &b) }
        })
        .collect())
}

pub fn importance_check(f: &TrajFn, mu: &LatticeField, n: u64, alpha: f64, horizon: usize, reps: u64, seed: StreamSeed) -> Result<ImportanceResult> {
    Ok(importance_battery(&[("f", f)], mu, n, alpha, horizon, reps, seed)?.remove(0))
}

/// The fixed battery of five bounded functionals.
pub fn standard_battery() -> Vec<(&'static str, Box<TrajFn>)> {
    vec![
        ("one", Box::new(|_: &Trajectory| 1.0)),
        ("extinct_at_horizon", Box::new(|t: &Trajectory| (t.x(t.horizon()).total() == 0) as u8 as f64)),
        ("origin_occupation_capped", Box::new(|t: &Trajectory| (t.occupation(t.horizon()).get(Site::ORIGIN) as f64).min(10.0))),
        ("final_mass_capped", Box::new(|t: &Trajectory| (t.x(t.horizon()).total() as f64).min(20.0))),
        ("crowded_site", Box::new(|t: &Trajectory| (t.occupation(t.horizon() + 1).max_count() >= 4) as u8 as f64)),
    ]
}
