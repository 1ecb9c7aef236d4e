//! Families of initial configurations `mu^k` indexed by a scaling index `k`.

use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::grid::BoxGrid;
use crate::kernel::{convolve_field, GreenTable, KernelTable};
use crate::lattice::Site;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    /// `k` particles, at most `cap` per site, filling a disc around the origin.
    PointSpreadD2 { cap: u64 },
    /// One particle per point of a sublattice `sZ^3`, with `s` chosen so that
    /// every ball of radius `3 C1 k^{1/6}` holds at most `C2` particles.
    BallBoundedD3 { c1: f64, c2: u64 },
    /// Radially non-increasing `floor(C (k / (|y|^2 + 1))^{alpha/2})`, whole
    /// shells added until the mass reaches `k`.
    RadialSpikeD2 { alpha: f64, c: f64 },
    /// `k` particles at the origin. Violates the spread condition in d = 2.
    SingleSite { d: usize },
    Empty { d: usize },
}

type Generator = Arc<dyn Fn(u64) -> LatticeField + Send + Sync>;

/// A generator of `mu^k` together with its declared constants.
#[derive(Clone)]
pub struct InitialConfigFamily {
    pub name: String,
    pub d: usize,
    /// `c1 k <= |mu^k| <= c2 k`.
    pub mass_bounds: (f64, f64),
    /// `supp(mu^k)` lies in the Euclidean ball of radius `support_a * sqrt(k)`.
    pub support_a: f64,
    /// Largest allowed `sup_k m(k, t_min) / sup_k m(k, t_max)` in [`validate_spread`].
    pub decay_limit: f64,
    /// Description of the limit of `mu^k(sqrt(k) .) / k`.
    pub target: String,
    gen: Generator,
}

impl fmt::Debug for InitialConfigFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "InitialConfigFamily({})", self.name)
    }
}

/// Lattice sites of a box ordered by `(|y|^2, key)`.
fn sites_by_radius(d: usize, r: i32, step: i32) -> Vec<Site> {
    let zr = if d == 3 { r } else { 0 };
    let mut v = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for c in -zr..=zr {
                v.push(Site::new(a * step, b * step, c * step));
            }
        }
    }
    v.sort_unstable_by_key(|s| (s.norm2(), *s));
    v
}

/// First `count` sites of the scaled lattice `step Z^d` in `(|y|^2, key)` order.
fn nearest_sites(d: usize, count: u64, step: i32) -> Vec<Site> {
    let mut r = 1;
    loop {
        // A box of radius r contains the full Euclidean ball of radius r.
        let ball = sites_by_radius(d, r, step);
        let inside = ball.iter().filter(|s| s.norm2() <= (r as i64 * step as i64).pow(2)).count() as u64;
        if inside >= count {
            return ball.into_iter().take(count as usize).collect();
        }
        r *= 2;
    }
}

impl InitialConfigFamily {
    pub fn generate(&self, k: u64) -> LatticeField {
        (self.gen)(k)
    }

    /// A family from an arbitrary generator.
    pub fn custom(
        name: &str,
        d: usize,
        mass_bounds: (f64, f64),
        support_a: f64,
        decay_limit: f64,
        gen: impl Fn(u64) -> LatticeField + Send + Sync + 'static,
    ) -> InitialConfigFamily {
        InitialConfigFamily {
            name: name.into(),
            d,
            mass_bounds,
            support_a,
            decay_limit,
            target: "user supplied".into(),
            gen: Arc::new(gen),
        }
    }

    /// Checks the declared mass and support bounds for one `k`.
    pub fn check_invariants(&self, k: u64) -> Result<()> {
        let mu = self.generate(k);
        let m = mu.total() as f64;
        let (c1, c2) = self.mass_bounds;
        if m < c1 * k as f64 || m > c2 * k as f64 {
            return Err(Error::Domain(format!("{}: |mu^{k}| = {m} outside [{c1} k, {c2} k]", self.name)));
        }
        let r = mu.support_radius();
        if r > self.support_a * (k as f64).sqrt() + 1e-9 {
            return Err(Error::Domain(format!("{}: support radius {r} exceeds {} sqrt(k)", self.name, self.support_a)));
        }
        Ok(())
    }
}

/// Sublattice spacing for the three-dimensional ball-bounded family.
pub fn ball_spacing(k: u64, c1: f64, c2: u64) -> i32 {
    let r = 3.0 * c1 * (k as f64).powf(1.0 / 6.0);
    let m = (c2 as f64).cbrt().floor() as i64;
    // Cube roots of perfect cubes can land just below the integer.
    let m = if ((m + 1).pow(3) as u64) <= c2 { m + 1 } else { m };
    if m <= 1 {
        (2.0 * r).floor() as i32 + 1
    } else {
        (2.0 * r / (m - 1) as f64).floor() as i32 + 1
    }
}

/// Radial profile of the spike family.
pub fn spike_profile(k: u64, y2: i64, alpha: f64, c: f64) -> u64 {
    (c * (k as f64 / (y2 as f64 + 1.0)).powf(alpha / 2.0)).floor() as u64
}

pub fn build_family(spec: &FamilySpec) -> Result<InitialConfigFamily> {
    Ok(match *spec {
        FamilySpec::PointSpreadD2 { cap } => {
            if cap == 0 {
                return Err(Error::Param("point_spread_d2 needs cap >= 1".into()));
            }
            InitialConfigFamily {
                name: format!("point_spread_d2(cap={cap})"),
                d: 2,
                mass_bounds: (1.0, 1.0),
                support_a: 1.0,
                decay_limit: 0.5,
                target: format!("uniform density {cap} on the disc of radius 1/sqrt(pi cap)"),
                gen: Arc::new(move |k| {
                    let sites = nearest_sites(2, k.div_ceil(cap), 1);
                    let mut f = LatticeField::new(2);
                    let mut left = k;
                    for s in sites {
                        let n = left.min(cap);
                        f.add(s, n);
                        left -= n;
                    }
                    f
                }),
            }
        }
        FamilySpec::BallBoundedD3 { c1, c2 } => {
            if !(c1 > 0.0) || c2 == 0 {
                return Err(Error::Param("ball_bounded_d3 needs C1 > 0 and C2 >= 1".into()));
            }
            InitialConfigFamily {
                name: format!("ball_bounded_d3(C1={c1},C2={c2})"),
                d: 3,
                mass_bounds: (1.0, 1.0),
                // Spacing ~ 6 C1 k^{1/6}, radius ~ spacing (3k / 4 pi)^{1/3}.
                support_a: 6.0 * c1 + 2.0,
                decay_limit: 0.5,
                target: "uniform density on a ball of radius about 3.7 C1".into(),
                gen: Arc::new(move |k| {
                    let s = ball_spacing(k, c1, c2);
                    LatticeField::from_pairs(3, nearest_sites(3, k, s).into_iter().map(|x| (x, 1)))
                }),
            }
        }
        FamilySpec::RadialSpikeD2 { alpha, c } => {
            if !(alpha > 0.0 && alpha < 2.0) || !(c > 0.0) {
                return Err(Error::Param(format!("radial_spike_d2 needs alpha in (0, 2) and C > 0, got {alpha}, {c}")));
            }
            InitialConfigFamily {
                name: format!("radial_spike_d2(alpha={alpha},C={c})"),
                d: 2,
                mass_bounds: (1.0, 3.0),
                support_a: 1.0,
                decay_limit: 0.6,
                target: "radial density with an integrable spike at the origin".into(),
                gen: Arc::new(move |k| {
                    let mut f = LatticeField::new(2);
                    if k == 0 {
                        return f;
                    }
                    let mut r = 4;
                    let sites = loop {
                        let v = sites_by_radius(2, r, 1);
                        let edge = (r as i64).pow(2);
                        let mass: u64 = v.iter().filter(|s| s.norm2() <= edge).map(|s| spike_profile(k, s.norm2(), alpha, c)).sum();
                        if mass >= k || spike_profile(k, edge, alpha, c) == 0 {
                            break v;
                        }
                        r *= 2;
                    };
                    let mut i = 0;
                    while f.total() < k && i < sites.len() {
                        let y2 = sites[i].norm2();
                        let v = spike_profile(k, y2, alpha, c);
                        if v == 0 {
                            break;
                        }
                        while i < sites.len() && sites[i].norm2() == y2 {
                            f.add(sites[i], v);
                            i += 1;
                        }
                    }
                    f
                }),
            }
        }
        FamilySpec::SingleSite { d } => InitialConfigFamily {
            name: "single_site".into(),
            d,
            mass_bounds: (1.0, 1.0),
            support_a: 0.0,
            decay_limit: 0.5,
            target: "point mass at the origin".into(),
            gen: Arc::new(move |k| LatticeField::point(d, k)),
        },
        FamilySpec::Empty { d } => InitialConfigFamily {
            name: "empty".into(),
            d,
            mass_bounds: (0.0, 0.0),
            support_a: 0.0,
            decay_limit: 0.5,
            target: "zero measure".into(),
            gen: Arc::new(move |_| LatticeField::new(d)),
        },
    })
}

/// Largest number of particles in any Euclidean ball of radius `r` centred at
/// a lattice point, found by exhaustive scan.
pub fn max_ball_count(mu: &LatticeField, r: f64) -> u64 {
    let ri = r.floor() as i32;
    let r2 = r * r;
    let d = mu.d();
    let zr = if d == 3 { ri } else { 0 };
    let mut counts: rustc_hash::FxHashMap<Site, u64> = Default::default();
    for (s, n) in mu.iter() {
        for a in -ri..=ri {
            for b in -ri..=ri {
                for c in -zr..=zr {
                    if ((a * a + b * b + c * c) as f64) <= r2 {
                        let cc = s.coords();
                        *counts.entry(Site::new(cc[0] + a, cc[1] + b, cc[2] + c)).or_insert(0) += n;
                    }
                }
            }
        }
    }
    counts.values().copied().max().unwrap_or(0)
}

/// `m(k, t) = max_x (mu^k G_{kt})(x) / k^{2 - d/2}` over a grid of `(k, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub family: String,
    pub ks: Vec<u64>,
    pub ts: Vec<f64>,
    /// `m[i][j] = m(ks[i], ts[j])`.
    pub m: Vec<Vec<f64>>,
    /// `max_t m(k, t) / t` per `k`.
    pub c_over_t: Vec<f64>,
    pub monotone_in_t: bool,
    /// `sup_k m(k, t_min) / sup_k m(k, t_max)`.
    pub decay_ratio: f64,
    /// `m(k_max, t_min) / m(k_min, t_min)`.
    pub growth_ratio: f64,
    pub decay_limit: f64,
    pub passed: bool,
}

/// Largest allowed growth of `m(k, t_min)` across the `k` grid.
pub const GROWTH_LIMIT: f64 = 1.25;

const MARGIN: i32 = 2;

fn spread_max(mu: &LatticeField, g: &BoxGrid) -> f64 {
    if mu.is_empty() {
        return 0.0;
    }
    let conv = convolve_field(mu, g);
    let mut best = 0.0f64;
    let d = mu.d();
    let zr = if d == 3 { MARGIN } else { 0 };
    for (s, _) in mu.sorted() {
        let c = s.coords();
        for a in -MARGIN..=MARGIN {
            for b in -MARGIN..=MARGIN {
                for z in -zr..=zr {
                    best = best.max(conv.get([c[0] + a, c[1] + b, c[2] + z]));
                }
            }
        }
    }
    best
}

fn validate_with(
    family: &InitialConfigFamily,
    ks: &[u64],
    ts: &[f64],
    green: &dyn Fn(usize) -> Result<BoxGrid>,
) -> Result<SmoothnessReport> {
    let d = family.d as f64;
    let mut m = Vec::with_capacity(ks.len());
    for &k in ks {
        let mu = family.generate(k);
        let norm = (k as f64).powf(2.0 - d / 2.0);
        let mut row = Vec::with_capacity(ts.len());
        for &t in ts {
            let n = (k as f64 * t).floor() as usize;
            row.push(spread_max(&mu, &green(n)?) / norm);
        }
        m.push(row);
    }
    let c_over_t = m.iter().map(|row| row.iter().zip(ts).map(|(v, t)| v / t).fold(0.0, f64::max)).collect();
    let (jmin, jmax) = argmin_max(ts);
    let mut monotone = true;
    for row in &m {
        let mut order: Vec<usize> = (0..ts.len()).collect();
        order.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));
        for w in order.windows(2) {
            if row[w[1]] < row[w[0]] {
                monotone = false;
            }
        }
    }
    let sup_at = |j: usize| m.iter().map(|r| r[j]).fold(0.0, f64::max);
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let decay_ratio = ratio(sup_at(jmin), sup_at(jmax));
    let (kmin, kmax) = argmin_max(&ks.iter().map(|&k| k as f64).collect::<Vec<_>>());
    let growth_ratio = ratio(m[kmax][jmin], m[kmin][jmin]);
    let passed = monotone && decay_ratio <= family.decay_limit && growth_ratio <= GROWTH_LIMIT;
    Ok(SmoothnessReport {
        family: family.name.clone(),
        ks: ks.to_vec(),
        ts: ts.to_vec(),
        m,
        c_over_t,
        monotone_in_t: monotone,
        decay_ratio,
        growth_ratio,
        decay_limit: family.decay_limit,
        passed,
    })
}

fn argmin_max(v: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[lo] {
            lo = i;
        }
        if *x > v[hi] {
            hi = i;
        }
    }
    (lo, hi)
}

/// Checks the spread condition `lim_{t->0} sup_k max_x (mu^k G_{kt})(x) / k^{2-d/2} = 0`
/// on a finite grid: `m` must increase with `t`, shrink by the family's
/// declared factor from the largest to the smallest `t`, and not grow with `k`.
pub fn validate_spread(family: &InitialConfigFamily, ks: &[u64], ts: &[f64], table: &KernelTable) -> Result<SmoothnessReport> {
    check_grid(ks, ts, table.n_max() + 1)?;
    validate_with(family, ks, ts, &|n| table.green(n))
}

/// As [`validate_spread`], with Green's functions from a [`GreenTable`] that
/// holds every needed horizon `floor(k t)`.
pub fn validate_spread_green(family: &InitialConfigFamily, ks: &[u64], ts: &[f64], greens: &GreenTable) -> Result<SmoothnessReport> {
    validate_with(family, ks, ts, &|n| greens.get(n).cloned())
}

fn check_grid(ks: &[u64], ts: &[f64], horizon: usize) -> Result<()> {
    if ks.is_empty() || ts.is_empty() {
        return Err(Error::Param("empty k or t grid".into()));
    }
    let kmax = *ks.iter().max().unwrap() as f64;
    let tmax = ts.iter().copied().fold(0.0, f64::max);
    let need = (kmax * tmax).floor() as usize;
    if need > horizon {
        return Err(Error::Horizon { requested: need, available: horizon });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_spread_cap_one() {
        let f = build_family(&FamilySpec::PointSpreadD2 { cap: 1 }).unwrap();
        let mu = f.generate(100);
        assert_eq!(mu.total(), 100);
        assert_eq!(mu.max_count(), 1);
        assert!(mu.support_radius() <= 10.0 / std::f64::consts::PI.sqrt() + 1.0);
        for k in [1, 2, 5, 64, 100, 257] {
            f.check_invariants(k).unwrap();
        }
    }

    #[test]
    fn ball_spacing_example() {
        assert_eq!(ball_spacing(64, 1.0, 8), 13);
        assert_eq!(ball_spacing(64, 1.0, 1), 13);
        assert_eq!(ball_spacing(64, 1.0, 27), 7);
    }

    #[test]
    fn spike_family_is_radially_monotone() {
        let f = build_family(&FamilySpec::RadialSpikeD2 { alpha: 1.0, c: 1.0 }).unwrap();
        let mu = f.generate(100);
        assert!(mu.get(Site::ORIGIN) <= 10);
        let mut v = mu.sorted();
        v.sort_by_key(|(s, _)| s.norm2());
        assert!(v.windows(2).all(|w| w[0].1 >= w[1].1));
        for k in [1, 16, 100, 1000] {
            f.check_invariants(k).unwrap();
        }
    }

    #[test]
    fn empty_and_single_site() {
        let e = build_family(&FamilySpec::Empty { d: 2 }).unwrap();
        assert!(e.generate(50).is_empty());
        let s = build_family(&FamilySpec::SingleSite { d: 3 }).unwrap();
        assert_eq!(s.generate(7).get(Site::ORIGIN), 7);
    }

    #[test]
    fn parameter_domains() {
        assert!(build_family(&FamilySpec::RadialSpikeD2 { alpha: 2.0, c: 1.0 }).is_err());
        assert!(build_family(&FamilySpec::PointSpreadD2 { cap: 0 }).is_err());
        assert!(build_family(&FamilySpec::BallBoundedD3 { c1: 0.0, c2: 8 }).is_err());
    }
}
