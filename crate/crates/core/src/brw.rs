//! The branching envelope: critical nearest-neighbour branching random walk.

use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::lattice::{Site, WalkSpec};
use crate::rng::{lane, StreamSeed};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rand_xoshiro::SplitMix64;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Default explosion guard: particles alive in one generation.
pub const DEFAULT_GUARD: u64 = 100_000_000;

/// Reproduction law of one particle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffspringLaw {
    /// Binomial(N, 1/((2d+1)N)) offspring at each of the 2d+1 moves.
    EnvelopeN(u64),
    /// Poisson(1/(2d+1)) offspring at each move.
    PoissonUnit,
    /// Total offspring `j` with probability `q[j]`, each placed uniformly.
    Custom(Vec<f64>),
}

impl OffspringLaw {
    pub fn custom(q: Vec<f64>) -> Result<OffspringLaw> {
        if q.is_empty() || q.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Param("offspring probabilities must lie in [0, 1]".into()));
        }
        let s: f64 = q.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Param(format!("offspring probabilities sum to {s}")));
        }
        Ok(OffspringLaw::Custom(q))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OffspringLaw::EnvelopeN(0) => Err(Error::Param("village size N must be >= 1".into())),
            OffspringLaw::Custom(q) => OffspringLaw::custom(q.clone()).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Mean total offspring as an exact fraction where one exists.
    pub fn mean_ratio(&self, d: usize) -> Option<(u64, u64)> {
        match self {
            OffspringLaw::EnvelopeN(n) => {
                let m = (2 * d as u64 + 1) * n;
                Some((m, m))
            }
            OffspringLaw::PoissonUnit => Some((1, 1)),
            OffspringLaw::Custom(_) => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            OffspringLaw::Custom(q) => q.iter().enumerate().map(|(j, p)| j as f64 * p).sum(),
            _ => 1.0,
        }
    }

    /// `E Z (Z - 1)` for the total offspring `Z`.
    pub fn factorial_moment2(&self, d: usize) -> f64 {
        match self {
            OffspringLaw::EnvelopeN(n) => 1.0 - 1.0 / ((2 * d + 1) as f64 * *n as f64),
            OffspringLaw::PoissonUnit => 1.0,
            OffspringLaw::Custom(q) => q.iter().enumerate().map(|(j, p)| (j * j.saturating_sub(1)) as f64 * p).sum(),
        }
    }

    /// Variance of the total offspring.
    pub fn variance(&self, d: usize) -> f64 {
        let m = self.mean();
        self.factorial_moment2(d) + m - m * m
    }

    pub fn max_offspring(&self) -> Option<usize> {
        match self {
            OffspringLaw::Custom(q) => Some(q.len() - 1),
            _ => None,
        }
    }
}

#[inline]
pub(crate) fn poisson(rng: &mut SplitMix64, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("finite positive intensity").sample(rng) as u64
}

#[inline]
pub(crate) fn binomial(rng: &mut SplitMix64, n: u64, p: f64) -> u64 {
    if n == 0 {
        return 0;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// Offspring of `m` particles at one site, counted per move in
/// [`WalkSpec::moves`] order.
pub fn sample_arrivals(law: &OffspringLaw, d: usize, m: u64, rng: &mut SplitMix64, out: &mut [u64]) {
    let k = 2 * d + 1;
    out[..k].iter_mut().for_each(|v| *v = 0);
    if m == 0 {
        return;
    }
    match law {
        OffspringLaw::EnvelopeN(n) => {
            let p = 1.0 / (k as f64 * *n as f64);
            for v in out[..k].iter_mut() {
                *v = binomial(rng, m * n, p);
            }
        }
        OffspringLaw::PoissonUnit => {
            let lam = m as f64 / k as f64;
            for v in out[..k].iter_mut() {
                *v = poisson(rng, lam);
            }
        }
        OffspringLaw::Custom(q) => {
            for _ in 0..m {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut z = q.len() - 1;
                for (j, p) in q.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        z = j;
                        break;
                    }
                }
                for _ in 0..z {
                    out[rng.random_range(0..k)] += 1;
                }
            }
        }
    }
}

/// One generation: every particle reproduces independently under `law`.
///
/// Randomness is addressed by `(seed, step, site)`, so the result does not
/// depend on the order in which sites are visited.
pub fn brw_step(x: &LatticeField, law: &OffspringLaw, seed: StreamSeed, step: u64) -> LatticeField {
    let d = x.d();
    let shifts = WalkSpec { d }.shifts();
    let mut next = LatticeField::with_capacity(d, x.support_size() * 2);
    let mut buf = [0u64; 7];
    for (s, m) in x.iter() {
        let mut rng = seed.at(step, s.key(), lane::OFFSPRING);
        sample_arrivals(law, d, m, &mut rng, &mut buf);
        for (i, sh) in shifts.iter().enumerate() {
            next.add(s.shift(*sh), buf[i]);
        }
    }
    next
}

/// Runs `horizon` generations from `mu`, handing each generation
/// `X_0, ..., X_horizon` to `observe`. Stops early when `observe` returns false.
pub fn brw_observe(
    mu: &LatticeField,
    law: &OffspringLaw,
    horizon: usize,
    seed: StreamSeed,
    guard: u64,
    mut observe: impl FnMut(usize, &LatticeField) -> bool,
) -> Result<()> {
    let mut cur = mu.clone();
    if !observe(0, &cur) {
        return Ok(());
    }
    for t in 1..=horizon {
        cur = brw_step(&cur, law, seed, (t - 1) as u64);
        if cur.total() > guard {
            return Err(Error::Explosion { population: cur.total(), limit: guard, step: t });
        }
        if !observe(t, &cur) {
            break;
        }
    }
    Ok(())
}

/// A stored run `X_0, ..., X_T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    d: usize,
    fields: Vec<LatticeField>,
}

impl Trajectory {
    pub fn from_fields(fields: Vec<LatticeField>) -> Trajectory {
        assert!(!fields.is_empty(), "a trajectory holds at least X_0");
        Trajectory { d: fields[0].d(), fields }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn horizon(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn x(&self, t: usize) -> &LatticeField {
        &self.fields[t]
    }

    pub fn fields(&self) -> &[LatticeField] {
        &self.fields
    }

    /// `R_n = sum_{i<n} X_i`, for `n <= horizon + 1`.
    pub fn occupation(&self, n: usize) -> LatticeField {
        let mut r = LatticeField::new(self.d);
        for f in &self.fields[..n] {
            for (s, c) in f.iter() {
                r.add(s, c);
            }
        }
        r
    }

    /// `lambda_t(x) = sum_e X_{t-1}(x + e) / (2d + 1)` for `t >= 1`, sorted by site.
    pub fn lambda(&self, t: usize) -> Vec<(Site, f64)> {
        lambda_field(&self.fields[t - 1])
    }

    /// First `t` with `X_t` empty.
    pub fn extinction_time(&self) -> Option<usize> {
        self.fields.iter().position(|f| f.is_empty())
    }

    pub fn masses(&self) -> Vec<u64> {
        self.fields.iter().map(|f| f.total()).collect()
    }
}

/// Neighbour-averaged predictor of the next generation, sorted by site.
pub fn lambda_field(prev: &LatticeField) -> Vec<(Site, f64)> {
    let d = prev.d();
    let shifts = WalkSpec { d }.shifts();
    let mut acc: FxHashMap<Site, u64> = FxHashMap::default();
    for (s, m) in prev.iter() {
        for sh in &shifts {
            *acc.entry(s.shift(*sh)).or_insert(0) += m;
        }
    }
    let k = (2 * d + 1) as f64;
    let mut v: Vec<(Site, f64)> = acc.into_iter().map(|(s, m)| (s, m as f64 / k)).collect();
    v.sort_unstable_by_key(|p| p.0);
    v
}

pub fn brw_run(mu: &LatticeField, law: &OffspringLaw, horizon: usize, seed: StreamSeed, guard: u64) -> Result<Trajectory> {
    let mut fields = Vec::with_capacity(horizon + 1);
    brw_observe(mu, law, horizon, seed, guard, |_, f| {
        fields.push(f.clone());
        true
    })?;
    Ok(Trajectory::from_fields(fields))
}

/// Streams a trajectory as `t,x,y[,z],count` rows, one block per generation.
pub struct TrajectoryWriter<W: Write> {
    out: W,
    d: usize,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W, d: usize) -> std::io::Result<TrajectoryWriter<W>> {
        if d == 2 {
            writeln!(out, "t,x,y,count")?;
        } else {
            writeln!(out, "t,x,y,z,count")?;
        }
        Ok(TrajectoryWriter { out, d })
    }

    pub fn write_step(&mut self, t: usize, field: &LatticeField) -> std::io::Result<()> {
        for (s, n) in field.sorted() {
            let c = s.coords();
            if self.d == 2 {
                writeln!(self.out, "{t},{},{},{n}", c[0], c[1])?;
            } else {
                writeln!(self.out, "{t},{},{},{},{n}", c[0], c[1], c[2])?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Per-replicate summary of an envelope run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub replicate: u64,
    pub horizon: usize,
    pub initial_mass: u64,
    pub final_mass: u64,
    pub max_mass: u64,
    pub total_occupation: u64,
    pub extinction_time: Option<usize>,
}

impl RunSummary {
    pub const CSV_HEADER: &'static str = "replicate,horizon,initial_mass,final_mass,max_mass,total_occupation,extinction_time";

    pub fn from_trajectory(replicate: u64, traj: &Trajectory) -> RunSummary {
        let m = traj.masses();
        RunSummary {
            replicate,
            horizon: traj.horizon(),
            initial_mass: m[0],
            final_mass: *m.last().unwrap(),
            max_mass: m.iter().copied().max().unwrap(),
            total_occupation: m.iter().sum(),
            extinction_time: traj.extinction_time(),
        }
    }

    pub fn csv_row(&self) -> String {
        let ext = self.extinction_time.map_or(String::new(), |t| t.to_string());
        format!(
            "{},{},{},{},{},{},{}",
            self.replicate, self.horizon, self.initial_mass, self.final_mass, self.max_mass, self.total_occupation, ext
        )
    }
}
