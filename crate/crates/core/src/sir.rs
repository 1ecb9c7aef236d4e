//! Lattice SIR epidemics coloured inside the branching envelope.
//!
//! Under the *standard* colouring, offspring of red particles draw village
//! labels in `1..=N`; a label already used at the site makes the attempt
//! errant, and simultaneous attempts on one fresh label collide with a single
//! uniformly chosen survivor. Under the *modified* colouring, at most one of
//! the `y` red-parent arrivals at a site is blue, with probability
//! `kappa(y, R, N) = min(y R / N, 1)`.

use crate::brw::{sample_arrivals, OffspringLaw};
use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::lattice::{Site, WalkSpec};
use crate::rng::{lane, StreamSeed};
use rand::Rng;
use rand_xoshiro::SplitMix64;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

/// `min(y R / N, 1)`; zero when `y = 0`.
pub fn kappa(y: u64, r: u64, n: u64) -> f64 {
    if y == 0 || r == 0 {
        return 0.0;
    }
    (y as f64 * r as f64 / n as f64).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coloring {
    Standard,
    Modified,
}

/// Red field, recovered field and label bookkeeping of one epidemic.
#[derive(Clone, Debug)]
pub struct EpidemicState {
    pub coloring: Coloring,
    pub n_village: u64,
    pub t: usize,
    /// Infected individuals `Y_t`.
    pub red: LatticeField,
    /// Recovered individuals `R_t = sum_{s<t} Y_s`.
    pub recovered: LatticeField,
    used: FxHashMap<Site, FxHashSet<u32>>,
    /// Collisions and errant attempts of the last step.
    pub step_collisions: u64,
    pub step_errant: u64,
    pub total_collisions: u64,
    pub total_errant: u64,
    /// Running `sum_{t,x} Gamma_t(x) + (A_t(x) - 1)_+`.
    pub collision_sum: u64,
}

/// Labels `1..=count` for the initially infected at a site.
fn seed_labels(count: u64, n: u64, s: Site) -> Result<FxHashSet<u32>> {
    if count > n {
        return Err(Error::Param(format!("{count} initial infections at {s:?} exceed village size {n}")));
    }
    Ok((1..=count as u32).collect())
}

impl EpidemicState {
    /// Initial state with `Y_0 = mu`. Under the standard colouring the labels
    /// `1..=mu(x)` are marked used at each site.
    pub fn new(mu: &LatticeField, n_village: u64, coloring: Coloring) -> Result<EpidemicState> {
        if n_village == 0 || n_village > u32::MAX as u64 {
            return Err(Error::Param(format!("village size {n_village} out of range")));
        }
        let mut used = FxHashMap::default();
        if coloring == Coloring::Standard {
            for (s, c) in mu.sorted() {
                used.insert(s, seed_labels(c, n_village, s)?);
            }
        }
        Ok(EpidemicState {
            coloring,
            n_village,
            t: 0,
            red: mu.clone(),
            recovered: LatticeField::new(mu.d()),
            used,
            step_collisions: 0,
            step_errant: 0,
            total_collisions: 0,
            total_errant: 0,
            collision_sum: 0,
        })
    }

    pub fn d(&self) -> usize {
        self.red.d()
    }

    /// Number of used labels at `x` (standard colouring).
    pub fn used_labels(&self, x: Site) -> usize {
        self.used.get(&x).map_or(0, |s| s.len())
    }

    /// Marks labels used at `x`; for setting up states by hand.
    pub fn mark_used(&mut self, x: Site, labels: impl IntoIterator<Item = u32>) {
        self.used.entry(x).or_default().extend(labels);
    }

    /// Capacity `R + Y <= N` everywhere and, under the standard colouring,
    /// `|used(x)| = R(x) + Y(x)`.
    pub fn check_invariants(&self) -> Result<()> {
        let mut sites: FxHashSet<Site> = self.red.iter().map(|p| p.0).collect();
        sites.extend(self.recovered.iter().map(|p| p.0));
        for s in sites {
            let occ = self.red.get(s) + self.recovered.get(s);
            if occ > self.n_village {
                return Err(Error::Domain(format!("capacity exceeded at {s:?}: {occ} > {}", self.n_village)));
            }
            if self.coloring == Coloring::Standard && self.used_labels(s) as u64 != occ {
                return Err(Error::Domain(format!("label count {} != R + Y = {occ} at {s:?}", self.used_labels(s))));
            }
        }
        Ok(())
    }
}

/// Red-parent arrivals per target site for one step, keyed by target.
fn red_arrivals(red: &LatticeField, law: &OffspringLaw, seed: StreamSeed, step: u64) -> FxHashMap<Site, u64> {
    let d = red.d();
    let shifts = WalkSpec { d }.shifts();
    let mut buf = [0u64; 7];
    let mut out: FxHashMap<Site, u64> = FxHashMap::default();
    for (s, m) in red.iter() {
        let mut rng = seed.at(step, s.key(), lane::OFFSPRING);
        sample_arrivals(law, d, m, &mut rng, &mut buf);
        for (i, sh) in shifts.iter().enumerate() {
            if buf[i] > 0 {
                *out.entry(s.shift(*sh)).or_insert(0) += buf[i];
            }
        }
    }
    out
}

/// Outcome of labelled attempts at one site.
struct LabelOutcome {
    /// Per attempt: did it infect?
    won: Vec<bool>,
    collisions: u64,
    errant: u64,
}

fn resolve_labels(count: usize, n: u64, used: &mut FxHashSet<u32>, rng: &mut SplitMix64, tie: &mut SplitMix64) -> LabelOutcome {
    let mut tagged: Vec<(u32, usize)> = (0..count).map(|i| (rng.random_range(1..=n as u32), i)).collect();
    tagged.sort_unstable();
    let mut won = vec![false; count];
    let mut collisions = 0;
    let mut errant = 0;
    let mut i = 0;
    while i < tagged.len() {
        let label = tagged[i].0;
        let mut j = i;
        while j < tagged.len() && tagged[j].0 == label {
            j += 1;
        }
        let size = (j - i) as u64;
        if used.contains(&label) {
            errant += size;
        } else {
            let w = i + tie.random_range(0..(j - i));
            won[tagged[w].1] = true;
            collisions += size - 1;
            used.insert(label);
        }
        i = j;
    }
    LabelOutcome { won, collisions, errant }
}

/// One standard-colouring step of the red particles, with arrivals drawn
/// from `law` (normally `EnvelopeN(N)`).
pub fn sir_step_standard(state: &EpidemicState, law: &OffspringLaw, seed: StreamSeed) -> EpidemicState {
    assert_eq!(state.coloring, Coloring::Standard);
    let step = state.t as u64;
    let arrivals = red_arrivals(&state.red, law, seed, step);
    let mut next = state.clone();
    for (s, c) in state.red.iter() {
        next.recovered.add(s, c);
    }
    next.red = LatticeField::with_capacity(state.d(), arrivals.len());
    next.step_collisions = 0;
    next.step_errant = 0;
    let mut targets: Vec<(Site, u64)> = arrivals.into_iter().collect();
    targets.sort_unstable_by_key(|p| p.0);
    for (x, a) in targets {
        let mut rng = seed.at(step, x.key(), lane::LABELS);
        let mut tie = seed.at(step, x.key(), lane::TIE_BREAK);
        let used = next.used.entry(x).or_default();
        let out = resolve_labels(a as usize, state.n_village, used, &mut rng, &mut tie);
        let winners = out.won.iter().filter(|&&w| w).count() as u64;
        next.red.add(x, winners);
        next.step_collisions += out.collisions;
        next.step_errant += out.errant;
        next.collision_sum += out.collisions + out.errant.saturating_sub(1);
    }
    next.total_collisions += next.step_collisions;
    next.total_errant += next.step_errant;
    next.t += 1;
    next
}

/// One modified-colouring step: `y` red-parent arrivals at `x` stay red,
/// except that with probability `kappa(y, R_{t+1}(x), N)` one of them is blue.
/// `R_{t+1}` already counts the parents' generation.
pub fn sir_step_modified(state: &EpidemicState, law: &OffspringLaw, seed: StreamSeed) -> EpidemicState {
    assert_eq!(state.coloring, Coloring::Modified);
    let step = state.t as u64;
    let arrivals = red_arrivals(&state.red, law, seed, step);
    let mut next = state.clone();
    for (s, c) in state.red.iter() {
        next.recovered.add(s, c);
    }
    next.red = LatticeField::with_capacity(state.d(), arrivals.len());
    for (x, y) in arrivals {
        let k = kappa(y, next.recovered.get(x), state.n_village);
        let blue = k > 0.0 && seed.at(step, x.key(), lane::KAPPA).random::<f64>() < k;
        next.red.add(x, y - blue as u64);
    }
    next.t += 1;
    next
}

/// Runs a single colouring for `horizon` steps, reporting each state.
pub fn sir_observe(
    mu: &LatticeField,
    n_village: u64,
    coloring: Coloring,
    law: &OffspringLaw,
    horizon: usize,
    seed: StreamSeed,
    mut observe: impl FnMut(&EpidemicState) -> bool,
) -> Result<EpidemicState> {
    let mut st = EpidemicState::new(mu, n_village, coloring)?;
    if !observe(&st) {
        return Ok(st);
    }
    for _ in 0..horizon {
        st = match coloring {
            Coloring::Standard => sir_step_standard(&st, law, seed),
            Coloring::Modified => sir_step_modified(&st, law, seed),
        };
        if !observe(&st) {
            break;
        }
    }
    Ok(st)
}

/// Particle classes of the coupled run: (standard colour, modified colour).
const RR: usize = 0;
const RB: usize = 1;
const BR: usize = 2;
const BB: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledOptions {
    pub law: OffspringLaw,
    pub guard: u64,
    /// Keep the per-step class fields.
    pub keep_fields: bool,
}

/// Both colourings of one envelope run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoupledRun {
    pub n_village: u64,
    pub alpha: f64,
    pub horizon: usize,
    /// Envelope, standard-red and modified-red masses per step.
    pub envelope_mass: Vec<u64>,
    pub std_mass: Vec<u64>,
    pub mod_mass: Vec<u64>,
    /// `max_x D_t(x)` per step.
    pub max_discrepancy_by_step: Vec<u64>,
    pub total_collisions: u64,
    pub total_errant: u64,
    /// `sum_{t,x} Gamma_t(x) + (A_t(x) - 1)_+`.
    pub collision_sum: u64,
    pub std_recovered_total: u64,
    pub mod_recovered_total: u64,
    pub envelope_occupation_total: u64,
    /// Per-step fields `(envelope, standard red, modified red)` when kept.
    pub fields: Vec<(LatticeField, LatticeField, LatticeField)>,
}

impl CoupledRun {
    pub fn max_discrepancy(&self) -> u64 {
        self.max_discrepancy_by_step.iter().copied().max().unwrap_or(0)
    }

    /// `sum {Gamma + (A - 1)_+} / N^alpha`.
    pub fn scaled_collisions(&self) -> f64 {
        self.collision_sum as f64 / (self.n_village as f64).powf(self.alpha)
    }

    pub fn scaled_discrepancy(&self) -> f64 {
        self.max_discrepancy() as f64 / (self.n_village as f64).powf(self.alpha)
    }

    /// First step with no standard-red particles.
    pub fn extinction_time(&self) -> Option<usize> {
        self.std_mass.iter().position(|&m| m == 0)
    }

    pub const CSV_HEADER: &'static str =
        "replicate,N,alpha,d,horizon,total_collisions,total_errant,max_discrepancy,extinction_time,std_recovered,mod_recovered,envelope_occupation";

    pub fn csv_row(&self, replicate: u64, d: usize) -> String {
        format!(
            "{replicate},{},{},{d},{},{},{},{},{},{},{},{}",
            self.n_village,
            self.alpha,
            self.horizon,
            self.total_collisions,
            self.total_errant,
            self.max_discrepancy(),
            self.extinction_time().map_or(String::new(), |t| t.to_string()),
            self.std_recovered_total,
            self.mod_recovered_total,
            self.envelope_occupation_total
        )
    }
}

/// Simulates the envelope with both colourings on one probability space.
///
/// The two colourings share every envelope arrival; the standard colouring
/// adds labels and tie-breaks, the modified colouring adds its own coins.
pub fn coupled_run(mu: &LatticeField, n_village: u64, alpha: f64, horizon: usize, seed: StreamSeed, opts: &CoupledOptions) -> Result<CoupledRun> {
    let d = mu.d();
    let shifts = WalkSpec { d }.shifts();
    let mut used: FxHashMap<Site, FxHashSet<u32>> = FxHashMap::default();
    for (s, c) in mu.sorted() {
        used.insert(s, seed_labels(c, n_village, s)?);
    }
    let mut classes: FxHashMap<Site, [u64; 4]> = mu.iter().map(|(s, c)| (s, [c, 0, 0, 0])).collect();
    let mut r_std = LatticeField::new(d);
    let mut r_mod = LatticeField::new(d);
    let mut env_occ = 0u64;
    let mut run = CoupledRun { n_village, alpha, horizon, ..Default::default() };
    let record = |classes: &FxHashMap<Site, [u64; 4]>, run: &mut CoupledRun, disc: u64| {
        let mut e = 0;
        let mut s = 0;
        let mut m = 0;
        for c in classes.values() {
            e += c.iter().sum::<u64>();
            s += c[RR] + c[RB];
            m += c[RR] + c[BR];
        }
        run.envelope_mass.push(e);
        run.std_mass.push(s);
        run.mod_mass.push(m);
        run.max_discrepancy_by_step.push(disc);
        if opts.keep_fields {
            let mut fe = LatticeField::new(d);
            let mut fs = LatticeField::new(d);
            let mut fm = LatticeField::new(d);
            for (&x, c) in classes {
                fe.add(x, c.iter().sum());
                fs.add(x, c[RR] + c[RB]);
                fm.add(x, c[RR] + c[BR]);
            }
            run.fields.push((fe, fs, fm));
        }
    };
    record(&classes, &mut run, 0);
    let mut buf = [0u64; 7];
    for t in 0..horizon {
        let step = t as u64;
        let mut arrivals: FxHashMap<Site, [u64; 4]> = FxHashMap::default();
        for (&s, c) in &classes {
            env_occ += c.iter().sum::<u64>();
            r_std.add(s, c[RR] + c[RB]);
            r_mod.add(s, c[RR] + c[BR]);
            for (cls, &m) in c.iter().enumerate() {
                if m == 0 {
                    continue;
                }
                let mut rng = seed.at(step, s.key(), lane::OFFSPRING * 8 + cls as u64);
                sample_arrivals(&opts.law, d, m, &mut rng, &mut buf);
                for (i, sh) in shifts.iter().enumerate() {
                    if buf[i] > 0 {
                        arrivals.entry(s.shift(*sh)).or_default()[cls] += buf[i];
                    }
                }
            }
        }
        let mut next: FxHashMap<Site, [u64; 4]> = FxHashMap::default();
        next.reserve(arrivals.len());
        let mut total = 0u64;
        let mut disc = 0u64;
        for (x, a) in arrivals {
            total += a.iter().sum::<u64>();
            let mut out = [0u64; 4];
            out[BB] = a[BB];
            // Standard colouring over red-parent arrivals: RR first, then RB.
            let n_std = (a[RR] + a[RB]) as usize;
            let std_won = if n_std > 0 {
                let mut rng = seed.at(step, x.key(), lane::LABELS);
                let mut tie = seed.at(step, x.key(), lane::TIE_BREAK);
                let u = used.entry(x).or_default();
                let o = resolve_labels(n_std, n_village, u, &mut rng, &mut tie);
                run.total_collisions += o.collisions;
                run.total_errant += o.errant;
                run.collision_sum += o.collisions + o.errant.saturating_sub(1);
                o.won
            } else {
                Vec::new()
            };
            // Modified colouring over RR and BR arrivals.
            let n_mod = a[RR] + a[BR];
            let k = kappa(n_mod, r_mod.get(x), n_village);
            let mut blue_idx = u64::MAX;
            if k > 0.0 {
                let mut rng = seed.at(step, x.key(), lane::KAPPA);
                if rng.random::<f64>() < k {
                    blue_idx = rng.random_range(0..n_mod);
                }
            }
            for i in 0..a[RR] {
                let s_red = std_won[i as usize];
                let m_red = i != blue_idx;
                out[class_of(s_red, m_red)] += 1;
            }
            for i in 0..a[RB] {
                out[class_of(std_won[(a[RR] + i) as usize], false)] += 1;
            }
            for i in 0..a[BR] {
                out[class_of(false, a[RR] + i != blue_idx)] += 1;
            }
            let ys = out[RR] + out[RB];
            let ym = out[RR] + out[BR];
            disc = disc.max(ys.abs_diff(ym));
            if out.iter().any(|&v| v > 0) {
                next.insert(x, out);
            }
        }
        if total > opts.guard {
            return Err(Error::Explosion { population: total, limit: opts.guard, step: t + 1 });
        }
        classes = next;
        record(&classes, &mut run, disc);
    }
    for c in classes.values() {
        env_occ += c.iter().sum::<u64>();
    }
    run.std_recovered_total = r_std.total() + classes.values().map(|c| c[RR] + c[RB]).sum::<u64>();
    run.mod_recovered_total = r_mod.total() + classes.values().map(|c| c[RR] + c[BR]).sum::<u64>();
    run.envelope_occupation_total = env_occ;
    Ok(run)
}

#[inline]
fn class_of(std_red: bool, mod_red: bool) -> usize {
    match (std_red, mod_red) {
        (true, true) => RR,
        (true, false) => RB,
        (false, true) => BR,
        (false, false) => BB,
    }
}
