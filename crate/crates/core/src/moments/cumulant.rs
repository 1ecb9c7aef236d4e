use super::{Convention, GridJson, LawExpansion};
use crate::brw::OffspringLaw;
use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::grid::{compensated_sum, BoxGrid};
use crate::kernel::KernelTable;
use crate::lattice::WalkSpec;
use serde::{Deserialize, Serialize};

/// `|nu|` above this aborts a recursion.
pub const DIVERGENCE_CEILING: f64 = 50.0;

/// Largest supported cumulant order.
const H_LIMIT: usize = 10;

/// Log-MGF and cumulant fields of an occupation-time functional.
///
/// `nu[i]` satisfies `E^mu exp <occupation_i, psi> = exp <mu, nu[i]>` and
/// `kappa[h - 1][i]` is the `theta^h` coefficient of the same with `psi`
/// replaced by `theta psi`. For a time-increment table, index `i` is the
/// window start `m` and the window length is `window`.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulantTable {
    pub convention: Convention,
    pub law: OffspringLaw,
    pub psi: BoxGrid,
    pub h_max: usize,
    pub window: Option<usize>,
    pub nu: Vec<BoxGrid>,
    pub kappa: Vec<Vec<BoxGrid>>,
    /// Largest observed gap between the truncated and the exact log
    /// generating function during the `nu` recursion.
    pub truncation_error: f64,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    convention: Convention,
    law: OffspringLaw,
    h_max: usize,
    window: Option<usize>,
    truncation_error: f64,
    psi: GridJson,
    nu: Vec<GridJson>,
    kappa: Vec<Vec<GridJson>>,
}

impl CumulantTable {
    pub fn n(&self) -> usize {
        self.nu.len().max(self.kappa.first().map_or(0, |k| k.len())) - 1
    }

    pub fn nu(&self, i: usize) -> &BoxGrid {
        &self.nu[i]
    }

    pub fn kappa(&self, h: usize, i: usize) -> &BoxGrid {
        &self.kappa[h - 1][i]
    }

    /// `exp <mu, nu_i>`.
    pub fn mgf(&self, mu: &LatticeField, i: usize) -> f64 {
        self.pair(mu, &self.nu[i]).exp()
    }

    /// `<mu, kappa_{h,i}>`.
    pub fn cumulant(&self, mu: &LatticeField, h: usize, i: usize) -> f64 {
        self.pair(mu, self.kappa(h, i))
    }

    fn pair(&self, mu: &LatticeField, g: &BoxGrid) -> f64 {
        compensated_sum(mu.sorted().into_iter().map(|(s, c)| c as f64 * g.at(s)))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let j = TableJson {
            convention: self.convention,
            law: self.law.clone(),
            h_max: self.h_max,
            window: self.window,
            truncation_error: self.truncation_error,
            psi: (&self.psi).into(),
            nu: self.nu.iter().map(GridJson::from).collect(),
            kappa: self.kappa.iter().map(|k| k.iter().map(GridJson::from).collect()).collect(),
        };
        serde_json::to_value(j).expect("table serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<CumulantTable> {
        let j: TableJson = serde_json::from_value(v.clone()).map_err(|e| Error::Param(e.to_string()))?;
        let grids = |v: &[GridJson]| v.iter().map(GridJson::to_grid).collect::<Result<Vec<_>>>();
        Ok(CumulantTable {
            convention: j.convention,
            law: j.law,
            psi: j.psi.to_grid()?,
            h_max: j.h_max,
            window: j.window,
            nu: grids(&j.nu)?,
            kappa: j.kappa.iter().map(|k| grids(k)).collect::<Result<Vec<_>>>()?,
            truncation_error: j.truncation_error,
        })
    }
}

/// Compositions of `h` into `m` positive parts, for `h <= h_max`.
struct Compositions {
    by: Vec<Vec<Vec<Vec<usize>>>>,
}

impl Compositions {
    fn new(h_max: usize) -> Compositions {
        let mut by = vec![vec![Vec::new(); h_max + 1]; h_max + 1];
        by[0][0].push(Vec::new());
        for h in 1..=h_max {
            for m in 1..=h {
                let mut list = Vec::new();
                for first in 1..=h - m + 1 {
                    for rest in &by[h - first][m - 1] {
                        let mut c = vec![first];
                        c.extend_from_slice(rest);
                        list.push(c);
                    }
                }
                by[h][m] = list;
            }
        }
        Compositions { by }
    }

    /// `out_h = sum_{m = m_lo..=h} coef[m] sum_{P_m(h)} prod a[h_i]`, `a` indexed from 1.
    fn expand(&self, a: &[f64], coef: impl Fn(usize) -> f64, m_lo: usize, out: &mut [f64]) {
        let h_max = out.len() - 1;
        for h in 1..=h_max {
            let mut total = 0.0;
            for m in m_lo..=h {
                let c = coef(m);
                if c == 0.0 {
                    continue;
                }
                let s: f64 = self.by[h][m].iter().map(|comp| comp.iter().map(|&k| a[k]).product::<f64>()).sum();
                total += c * s;
            }
            out[h] = total;
        }
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

fn check_h(h_max: usize) -> Result<()> {
    if h_max == 0 || h_max > H_LIMIT {
        return Err(Error::Param(format!("h_max must lie in 1..={H_LIMIT}, got {h_max}")));
    }
    Ok(())
}

/// The ceiling applies to `nu` only; cumulants can grow large legitimately
/// (the variance of a long occupation time), so they only have to stay finite.
fn finite(g: &BoxGrid, step: usize) -> Result<()> {
    match g.data.iter().find(|v| !v.is_finite()) {
        Some(&v) => Err(Error::Divergence { value: v, ceiling: f64::INFINITY, step }),
        None => Ok(()),
    }
}

fn guard(g: &BoxGrid, step: usize) -> Result<()> {
    finite(g, step)?;
    let v = g.max_abs();
    if !(v <= DIVERGENCE_CEILING) {
        return Err(Error::Divergence { value: v, ceiling: DIVERGENCE_CEILING, step });
    }
    Ok(())
}

/// `nu_{i+1} = f(P_1 * expm1(extra + nu_i))`, with `f` the law's log
/// generating function about 1.
fn nu_step(prev: &BoxGrid, extra: Option<&BoxGrid>, law: &LawExpansion, trunc: &mut f64) -> BoxGrid {
    let shifted = match extra {
        Some(psi) => prev.axpy(1.0, psi),
        None => prev.clone(),
    };
    let mut v = shifted.map(f64::exp_m1).stencil_step();
    for x in v.data.iter_mut() {
        let t = law.apply(*x);
        if let Some(e) = law.exact(*x) {
            if e.is_finite() {
                *trunc = trunc.max((t - e).abs());
            }
        }
        *x = t;
    }
    v
}

/// Log-MGF fields `nu_0..=nu_n` of the occupation time over `n` generations.
///
/// The recursion itself counts generations `1..=n` from `nu_0 = 0`. The other
/// convention follows from `E^mu exp <R_{i+1}, psi> = exp <mu, psi + nu_i>`.
pub fn nu_recursion(psi: &BoxGrid, n: usize, law: &OffspringLaw, convention: Convention) -> Result<CumulantTable> {
    let exp = LawExpansion::new(law)?;
    let mut trunc = 0.0;
    let mut nu = vec![psi.map(|_| 0.0)];
    for i in 0..n {
        let next = nu_step(&nu[i], Some(psi), &exp, &mut trunc);
        guard(&next, i + 1)?;
        nu.push(next);
    }
    if convention == Convention::Gen0ToNMinus1 {
        nu = shift_convention(psi, nu, true);
    }
    Ok(CumulantTable {
        convention,
        law: law.clone(),
        psi: psi.clone(),
        h_max: 0,
        window: None,
        nu,
        kappa: Vec::new(),
        truncation_error: trunc,
    })
}

/// Maps generation-1 fields `g_0..=g_n` to generation-0 fields: `0` at index
/// 0, `g_{i-1} (+ psi)` at index `i`.
fn shift_convention(psi: &BoxGrid, g: Vec<BoxGrid>, add_psi: bool) -> Vec<BoxGrid> {
    let n = g.len() - 1;
    let mut out = Vec::with_capacity(n + 1);
    out.push(psi.map(|_| 0.0));
    for prev in g.into_iter().take(n) {
        out.push(if add_psi { prev.axpy(1.0, psi).resized(prev.lo, prev.ext) } else { prev });
    }
    // Keep every step on the psi box fattened by its index.
    for (i, g) in out.iter_mut().enumerate() {
        let want = psi.expanded(i as i32);
        if g.lo != want.lo || g.ext != want.ext {
            *g = g.union_box(&want).resized(want.lo, want.ext);
        }
    }
    out
}

/// Pointwise values of a vector of grids sharing one box.
fn column(grids: &[BoxGrid], idx: usize, a: &mut [f64]) {
    for (h, g) in grids.iter().enumerate() {
        a[h + 1] = g.data[idx];
    }
}

/// One step of the direct recursion: cumulant fields of order `1..=h_max` at
/// step `i` (all on one box) to step `i + 1`.
fn direct_step(prev: &[BoxGrid], psi: Option<&BoxGrid>, law: &LawExpansion, comps: &Compositions, fact: &[f64]) -> Vec<BoxGrid> {
    let h_max = prev.len();
    let bx = &prev[0];
    let psi_here = psi.map(|p| p.union_box(bx).resized(bx.lo, bx.ext));
    // E_h(x) = sum_m (1/m!) sum_{P_m(h)} prod (kappa_{h_i} + [h_i = 1] psi).
    let mut e: Vec<BoxGrid> = vec![bx.map(|_| 0.0); h_max];
    let mut a = vec![0.0; h_max + 1];
    let mut out = vec![0.0; h_max + 1];
    for idx in 0..bx.data.len() {
        column(prev, idx, &mut a);
        if let Some(p) = &psi_here {
            a[1] += p.data[idx];
        }
        comps.expand(&a, |m| 1.0 / fact[m], 1, &mut out);
        for h in 0..h_max {
            e[h].data[idx] = out[h + 1];
        }
    }
    let s: Vec<BoxGrid> = e.iter().map(BoxGrid::stencil_step).collect();
    let mut next: Vec<BoxGrid> = vec![s[0].map(|_| 0.0); h_max];
    let coeffs = &law.coeffs;
    for idx in 0..s[0].data.len() {
        column(&s, idx, &mut a);
        comps.expand(&a, |l| coeffs.get(l).copied().unwrap_or(0.0), 1, &mut out);
        for h in 0..h_max {
            next[h].data[idx] = out[h + 1];
        }
    }
    next
}

fn zero_orders(psi: &BoxGrid, h_max: usize) -> Vec<BoxGrid> {
    vec![psi.map(|_| 0.0); h_max]
}

/// `kappa[h-1][i]` from per-step vectors `steps[i][h-1]`.
fn transpose(steps: Vec<Vec<BoxGrid>>, h_max: usize) -> Vec<Vec<BoxGrid>> {
    let mut out: Vec<Vec<BoxGrid>> = vec![Vec::with_capacity(steps.len()); h_max];
    for st in steps {
        for (h, g) in st.into_iter().enumerate() {
            out[h].push(g);
        }
    }
    out
}

fn finish(psi: &BoxGrid, h_max: usize, n: usize, law: &OffspringLaw, convention: Convention, steps: Vec<Vec<BoxGrid>>) -> Result<CumulantTable> {
    let mut kappa = transpose(steps, h_max);
    if convention == Convention::Gen0ToNMinus1 {
        kappa = kappa.into_iter().enumerate().map(|(h, k)| shift_convention(psi, k, h == 0)).collect();
    }
    let nu = nu_recursion(psi, n, law, convention).map(|t| (t.nu, t.truncation_error));
    let (nu, trunc) = match nu {
        Ok(v) => v,
        Err(Error::Divergence { .. }) => (Vec::new(), f64::NAN),
        Err(e) => return Err(e),
    };
    Ok(CumulantTable { convention, law: law.clone(), psi: psi.clone(), h_max, window: None, nu, kappa, truncation_error: trunc })
}

/// Cumulant fields `kappa_{h,i}`, `h <= h_max`, `i <= n`, by the direct
/// partition recursion. `nu` is attached when its recursion stays bounded.
pub fn cumulant_recursion(psi: &BoxGrid, h_max: usize, n: usize, law: &OffspringLaw, convention: Convention) -> Result<CumulantTable> {
    check_h(h_max)?;
    let exp = LawExpansion::new(law)?;
    let comps = Compositions::new(h_max);
    let fact = factorials(h_max);
    let mut steps = vec![zero_orders(psi, h_max)];
    for i in 0..n {
        let next = direct_step(&steps[i], Some(psi), &exp, &comps, &fact);
        for g in &next {
            finite(g, i + 1)?;
        }
        steps.push(next);
    }
    finish(psi, h_max, n, law, convention, steps)
}

/// Only the last step of [`cumulant_recursion`], `kappa_{h,n}` for
/// `h = 1..=h_max`, keeping a single step in memory.
pub fn cumulant_final(psi: &BoxGrid, h_max: usize, n: usize, law: &OffspringLaw, convention: Convention) -> Result<Vec<BoxGrid>> {
    check_h(h_max)?;
    let exp = LawExpansion::new(law)?;
    let comps = Compositions::new(h_max);
    let fact = factorials(h_max);
    let steps = match convention {
        Convention::Gen1ToN => n,
        Convention::Gen0ToNMinus1 => n.saturating_sub(1),
    };
    let mut cur = zero_orders(psi, h_max);
    for i in 0..steps {
        cur = direct_step(&cur, Some(psi), &exp, &comps, &fact);
        for g in &cur {
            finite(g, i + 1)?;
        }
    }
    if convention == Convention::Gen0ToNMinus1 && n > 0 {
        let first = cur[0].axpy(1.0, psi);
        cur[0] = first.resized(cur[0].lo, cur[0].ext);
        let want = psi.expanded(n as i32);
        for g in cur.iter_mut() {
            *g = g.union_box(&want).resized(want.lo, want.ext);
        }
    }
    Ok(cur)
}

/// The same cumulants from the iterated form
/// `kappa_{h,n} = sum_{l<n} c_1^l P_l * Xi_{n-l}`, where `Xi` collects every
/// term of the one-step recursion except `c_1 P_1 * kappa_{h,n-1}`.
pub fn cumulant_recursion_iterated(psi: &BoxGrid, h_max: usize, n: usize, law: &OffspringLaw, convention: Convention) -> Result<CumulantTable> {
    check_h(h_max)?;
    let exp = LawExpansion::new(law)?;
    let comps = Compositions::new(h_max);
    let fact = factorials(h_max);
    let table = KernelTable::build(WalkSpec::new(psi.d)?, n.saturating_sub(1))?;
    let c1 = exp.linear();
    let boxes: Vec<BoxGrid> = (0..=n).map(|i| psi.expanded(i as i32).map(|_| 0.0)).collect();
    // kappa[i][h-1], filled order by order.
    let mut kappa: Vec<Vec<BoxGrid>> = (0..=n).map(|i| vec![boxes[i].clone(); h_max]).collect();
    let mut a = vec![0.0; h_max + 1];
    let mut out = vec![0.0; h_max + 1];
    for h in 1..=h_max {
        // Xi_j for j = 1..=n uses orders below h at step j - 1.
        let mut xi: Vec<BoxGrid> = vec![boxes[0].clone()];
        for j in 1..=n {
            let bx = &boxes[j - 1];
            let psi_here = psi.union_box(bx).resized(bx.lo, bx.ext);
            let lower: Vec<BoxGrid> = (0..h_max).map(|k| if k + 1 < h { kappa[j - 1][k].clone() } else { bx.clone() }).collect();
            // s_k for k < h in full; for k = h only the part free of kappa_h.
            let mut e_full = vec![bx.clone(); h];
            for idx in 0..bx.data.len() {
                column(&lower, idx, &mut a);
                a[1] += psi_here.data[idx];
                comps.expand(&a, |m| 1.0 / fact[m], 1, &mut out);
                for k in 0..h {
                    e_full[k].data[idx] = out[k + 1];
                }
            }
            let s: Vec<BoxGrid> = e_full.iter().map(BoxGrid::stencil_step).collect();
            let mut xj = s[0].map(|_| 0.0);
            let mut sv = vec![0.0; h_max + 1];
            let mut o = vec![0.0; h_max + 1];
            for idx in 0..xj.data.len() {
                for k in 0..h {
                    sv[k + 1] = s[k].data[idx];
                }
                for v in sv.iter_mut().skip(h + 1) {
                    *v = 0.0;
                }
                comps.expand(&sv, |l| exp.coeffs.get(l).copied().unwrap_or(0.0), 1, &mut o);
                xj.data[idx] = o[h];
            }
            xi.push(xj);
        }
        for i in 1..=n {
            let mut acc = boxes[i].clone();
            for l in 0..i {
                let term = table.p(l)?.convolve(&xi[i - l]);
                debug_assert_eq!(term.lo, acc.lo);
                let w = c1.powi(l as i32);
                for (t, v) in acc.data.iter_mut().zip(&term.data) {
                    *t += w * v;
                }
            }
            finite(&acc, i)?;
            kappa[i][h - 1] = acc;
        }
    }
    finish(psi, h_max, n, law, convention, kappa)
}

/// Cumulants of `<R_{n+m} - R_m, psi>` (generations `m..m+n-1`) for every
/// window start `0..=m`.
///
/// The window start advances by conditioning on the first generation, which
/// no longer sees `psi`. Iterating that step from the start `0` gives
/// `kappa_{h,(n,m)} = sum_{i<m} P_i * Xi~_{n,m-i} + P_m * kappa_{h,(n,0)}`;
/// the last term is the full-window cumulant and does not vanish for `h >= 2`.
/// The log-MGF fields are attached only while they stay below the ceiling.
pub fn cumulant_time_increment(psi: &BoxGrid, n: usize, m: usize, h_max: usize, law: &OffspringLaw) -> Result<CumulantTable> {
    check_h(h_max)?;
    let base = cumulant_recursion(psi, h_max, n, law, Convention::Gen0ToNMinus1)?;
    let exp = LawExpansion::new(law)?;
    let comps = Compositions::new(h_max);
    let fact = factorials(h_max);
    let mut steps: Vec<Vec<BoxGrid>> = vec![(1..=h_max).map(|h| base.kappa(h, n).clone()).collect()];
    let mut trunc = base.truncation_error;
    let mut nu = if base.nu.is_empty() { Vec::new() } else { vec![base.nu[n].clone()] };
    for j in 0..m {
        let next = direct_step(&steps[j], None, &exp, &comps, &fact);
        for g in &next {
            finite(g, j + 1)?;
        }
        steps.push(next);
        if let Some(prev) = nu.last() {
            let v = nu_step(prev, None, &exp, &mut trunc);
            // The log-MGF may blow up while the cumulants stay finite.
            if guard(&v, j + 1).is_ok() {
                nu.push(v);
            } else {
                nu.clear();
                trunc = f64::NAN;
            }
        }
    }
    Ok(CumulantTable {
        convention: Convention::Gen0ToNMinus1,
        law: law.clone(),
        psi: psi.clone(),
        h_max,
        window: Some(n),
        nu,
        kappa: transpose(steps, h_max),
        truncation_error: trunc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Site;

    fn point(d: usize, v: f64) -> BoxGrid {
        BoxGrid::delta(d, v)
    }

    #[test]
    fn compositions_count() {
        let c = Compositions::new(6);
        for h in 1..=6 {
            let total: usize = (1..=h).map(|m| c.by[h][m].len()).sum();
            assert_eq!(total, 1 << (h - 1));
        }
        assert_eq!(c.by[3][2], vec![vec![1, 2], vec![2, 1]]);
    }

    #[test]
    fn zero_psi_gives_zero_nu() {
        let t = nu_recursion(&point(2, 0.0), 5, &OffspringLaw::PoissonUnit, Convention::Gen1ToN).unwrap();
        assert!(t.nu.iter().all(|g| g.max_abs() == 0.0));
    }

    #[test]
    fn one_step_poisson_nu() {
        let t = nu_recursion(&point(2, -1.0), 1, &OffspringLaw::PoissonUnit, Convention::Gen1ToN).unwrap();
        let want = 0.2 * ((-1f64).exp() + 4.0) - 1.0;
        assert!((t.nu(1).at(Site::ORIGIN) - want).abs() < 1e-16);
        assert!((want + 0.126_424_111_765_711_5).abs() < 1e-15);
    }

    #[test]
    fn divergence_guard_trips() {
        let r = nu_recursion(&point(2, 3.0), 40, &OffspringLaw::PoissonUnit, Convention::Gen1ToN);
        assert!(matches!(r, Err(Error::Divergence { .. })));
    }

    #[test]
    fn cumulants_survive_a_divergent_nu() {
        let t = cumulant_recursion(&point(2, 3.0), 2, 40, &OffspringLaw::PoissonUnit, Convention::Gen1ToN).unwrap();
        assert!(t.nu.is_empty());
        assert!(t.kappa(2, 40).max_abs() > DIVERGENCE_CEILING);
        let last = cumulant_final(&point(2, 3.0), 2, 40, &OffspringLaw::PoissonUnit, Convention::Gen1ToN).unwrap();
        assert_eq!(&last[1], t.kappa(2, 40));
    }

    #[test]
    fn second_cumulant_one_step() {
        let t = cumulant_recursion(&point(2, 1.0), 3, 1, &OffspringLaw::PoissonUnit, Convention::Gen1ToN).unwrap();
        assert!((t.kappa(2, 1).at(Site::ORIGIN) - 0.1).abs() < 1e-16);
        assert!((t.kappa(1, 1).at(Site::ORIGIN) - 0.2).abs() < 1e-16);
        for h in 2..=3 {
            assert_eq!(t.kappa(h, 0).max_abs(), 0.0);
        }
    }

    #[test]
    fn dipole_first_cumulant_is_green_difference() {
        let mut psi = BoxGrid::zeros(2, [0, 0, 0], [2, 1, 1]);
        psi.set([0, 0, 0], 1.0);
        psi.set([1, 0, 0], -1.0);
        let n = 4;
        let t = cumulant_recursion(&psi, 2, n, &OffspringLaw::PoissonUnit, Convention::Gen0ToNMinus1).unwrap();
        let kt = KernelTable::build(WalkSpec::new(2).unwrap(), n).unwrap();
        assert_eq!(t.kappa(1, 1).at(Site::ORIGIN), 1.0);
        for i in 0..=n {
            for x in WalkSpec::new(2).unwrap().box_sites(3) {
                let a = Site::ORIGIN.offset(x.neg());
                let b = Site::new(1, 0, 0).offset(x.neg());
                let want = kt.green_at(i, a).unwrap() - kt.green_at(i, b).unwrap();
                assert!((t.kappa(1, i).at(x) - want).abs() < 1e-14, "i={i} x={x:?}");
            }
        }
    }

    #[test]
    fn engines_agree() {
        let mut psi = BoxGrid::zeros(2, [-1, 0, 0], [3, 2, 1]);
        psi.set([-1, 0, 0], 0.3);
        psi.set([0, 1, 0], -0.7);
        psi.set([1, 0, 0], 0.2);
        for law in [OffspringLaw::PoissonUnit, OffspringLaw::custom(vec![0.25, 0.5, 0.25]).unwrap()] {
            for conv in [Convention::Gen1ToN, Convention::Gen0ToNMinus1] {
                let a = cumulant_recursion(&psi, 4, 6, &law, conv).unwrap();
                let b = cumulant_recursion_iterated(&psi, 4, 6, &law, conv).unwrap();
                for h in 1..=4 {
                    for i in 0..=6 {
                        let (ga, gb) = (a.kappa(h, i), b.kappa(h, i));
                        assert_eq!(ga.lo, gb.lo);
                        for (x, y) in ga.data.iter().zip(&gb.data) {
                            assert!((x - y).abs() < 1e-10, "h={h} i={i}: {x} vs {y}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn time_increment_base_and_first_cumulant() {
        let psi = point(2, 1.0);
        let law = OffspringLaw::PoissonUnit;
        let t = cumulant_time_increment(&psi, 1, 1, 2, &law).unwrap();
        assert!((t.kappa(1, 1).at(Site::ORIGIN) - 0.2).abs() < 1e-16);
        let (n, m) = (3, 4);
        let ti = cumulant_time_increment(&psi, n, m, 3, &law).unwrap();
        let full = cumulant_recursion(&psi, 3, n, &law, Convention::Gen0ToNMinus1).unwrap();
        for h in 1..=3 {
            assert_eq!(ti.kappa(h, 0), full.kappa(h, n));
        }
        let kt = KernelTable::build(WalkSpec::new(2).unwrap(), n + m).unwrap();
        for j in 0..=m {
            for x in WalkSpec::new(2).unwrap().box_sites(4) {
                let want: f64 = (j..j + n).map(|l| kt.prob(l, x.neg())).sum();
                assert!((ti.kappa(1, j).at(x) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn final_step_matches_full_table() {
        let psi = point(2, 0.4);
        for conv in [Convention::Gen1ToN, Convention::Gen0ToNMinus1] {
            let full = cumulant_recursion(&psi, 3, 5, &OffspringLaw::PoissonUnit, conv).unwrap();
            let last = cumulant_final(&psi, 3, 5, &OffspringLaw::PoissonUnit, conv).unwrap();
            for h in 1..=3 {
                assert_eq!(&last[h - 1], full.kappa(h, 5));
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let t = cumulant_recursion(&point(3, -0.5), 2, 2, &OffspringLaw::PoissonUnit, Convention::Gen1ToN).unwrap();
        let back = CumulantTable::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }
}
