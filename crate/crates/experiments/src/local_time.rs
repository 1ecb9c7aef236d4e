//! Re-centred occupation fields `Y_k(t, x)` and the consecutive-level
//! Kolmogorov-Smirnov diagnostic.

use crate::config::ExperimentConfig;
use crate::report::{fmt_seq, non_increasing, Check, DiagnosticReport, Distance, LevelSummary, Verdict};
use crate::{ExperimentError, Outcome};
use brwepi::brw::{brw_observe, OffspringLaw, Trajectory, DEFAULT_GUARD};
use brwepi::family::build_family;
use brwepi::moments::{cumulant_final, Convention};
use brwepi::rng::StreamSeed;
use brwepi::stats::{ks_pvalue, ks_statistic, z_against, Welford};
use brwepi::{BoxGrid, GreenTable, LatticeField, Site, WalkSpec};
use rayon::prelude::*;

/// Two-sample KS critical coefficient at the 5% level.
const KS_C_05: f64 = 1.358;

/// `floor(k t)`, guarded against `k t` landing just below an integer.
pub fn generations(k: u64, t: f64) -> usize {
    (k as f64 * t + 1e-9).floor() as usize
}

/// `round(sqrt(k) x)`.
pub fn probe_site(k: u64, x: &[f64]) -> Site {
    let s = (k as f64).sqrt();
    let c: Vec<i32> = x.iter().map(|v| (v * s).round() as i32).collect();
    Site::from_slice(&c)
}

/// `k^{2 - d/2}`.
pub fn local_time_scale(k: u64, d: usize) -> f64 {
    (k as f64).powf(2.0 - d as f64 / 2.0)
}

/// Exact centring `(mu G_n)(site)` for every `(n, site)` pair, from a Green
/// table stored only as far as the pairs reach.
pub fn exact_means(mu: &LatticeField, pairs: &[(usize, Site)]) -> brwepi::Result<Vec<f64>> {
    let d = mu.d();
    let reach = pairs.iter().map(|p| p.1.norm_inf()).max().unwrap_or(0);
    let radius = mu.support_radius_inf() + reach + 1;
    let ns: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let greens = GreenTable::build(WalkSpec { d }, &ns, Some(radius));
    pairs.iter().map(|&(n, s)| greens.mu_green_at(mu, n, s)).collect()
}

/// `Y_k(t, x) = (R_{floor(kt)}(round(sqrt(k) x)) - (mu G_{floor(kt)})(round(sqrt(k) x))) / k^{2-d/2}`
/// on the grid `ts x xs`, indexed `[t][x]`.
pub fn local_time_field(traj: &Trajectory, k: u64, ts: &[f64], xs: &[Vec<f64>]) -> brwepi::Result<Vec<Vec<f64>>> {
    let d = traj.d();
    let mu = traj.x(0);
    let scale = local_time_scale(k, d);
    let mut pairs = Vec::new();
    for &t in ts {
        let n = generations(k, t);
        if n > traj.horizon() + 1 {
            return Err(brwepi::Error::Horizon { requested: n, available: traj.horizon() + 1 });
        }
        for x in xs {
            pairs.push((n, probe_site(k, x)));
        }
    }
    let means = exact_means(mu, &pairs)?;
    let mut out = vec![Vec::with_capacity(xs.len()); ts.len()];
    for (i, ((n, s), m)) in pairs.iter().zip(means).enumerate() {
        let r = traj.occupation(*n).get(*s) as f64;
        out[i / xs.len()].push((r - m) / scale);
    }
    Ok(out)
}

/// `Var <R_n, delta_s>` under `mu` from the second cumulant, or `None` when
/// the law has no expansion or the cell-step count exceeds `budget`.
pub fn variance_oracle(mu: &LatticeField, law: &OffspringLaw, n: usize, s: Site, budget: u64) -> brwepi::Result<Option<f64>> {
    let d = mu.d();
    let cells = (2 * n as u64 + 1).pow(d as u32);
    if cells.saturating_mul(n as u64) > budget || matches!(law, OffspringLaw::EnvelopeN(_)) {
        return Ok(None);
    }
    if n == 0 {
        return Ok(Some(0.0));
    }
    let psi = BoxGrid::delta(d, 1.0);
    let kap = cumulant_final(&psi, 2, n, law, Convention::Gen0ToNMinus1)?;
    let sc = s.coords();
    let v = mu.pair_with(|y| {
        let c = y.coords();
        kap[1].get([c[0] - sc[0], c[1] - sc[1], c[2] - sc[2]])
    });
    Ok(Some(2.0 * v))
}

/// Sample variance with a delta-method standard error from the fourth
/// central moment.
pub fn variance_with_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let w: Welford = xs.iter().copied().collect();
    let m = w.mean();
    let s2 = w.variance();
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let var_s2 = (m4 - (n - 3.0) / (n - 1.0) * s2 * s2) / n;
    (s2, var_s2.max(0.0).sqrt())
}

struct Probe {
    t: f64,
    x: Vec<f64>,
}

impl Probe {
    fn label(&self) -> String {
        let xs: Vec<String> = self.x.iter().map(|v| format!("{v}")).collect();
        format!("t={},x=({})", self.t, xs.join(","))
    }
}

/// Samples of `Y_k` at every probe for one level, indexed `[probe][replicate]`.
fn sample_level(cfg: &ExperimentConfig, mu: &LatticeField, k: u64, probes: &[Probe]) -> brwepi::Result<Vec<Vec<f64>>> {
    let d = cfg.d;
    let law = cfg.offspring_law(0);
    let scale = local_time_scale(k, d);
    let targets: Vec<(usize, Site)> = probes.iter().map(|p| (generations(k, p.t), probe_site(k, &p.x))).collect();
    let means = exact_means(mu, &targets)?;
    let horizon = targets.iter().map(|p| p.0).max().unwrap_or(0);
    let master = StreamSeed::new(cfg.seed, 0).fork(k).master;
    let per_rep: Vec<Vec<f64>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            // R_n(s) only at the probe sites, accumulated while streaming.
            let mut occ = vec![0u64; targets.len()];
            let mut done = targets.iter().all(|p| p.0 == 0);
            if !done {
                brw_observe(mu, &law, horizon.saturating_sub(1), StreamSeed::new(master, r), DEFAULT_GUARD, |g, f| {
                    for (i, (n, s)) in targets.iter().enumerate() {
                        if g < *n {
                            occ[i] += f.get(*s);
                        }
                    }
                    done = f.is_empty();
                    !done
                })?;
            }
            Ok(occ.iter().zip(&means).map(|(&o, m)| (o as f64 - m) / scale).collect())
        })
        .collect::<brwepi::Result<_>>()?;
    Ok((0..probes.len()).map(|i| per_rep.iter().map(|v| v[i]).collect()).collect())
}

pub fn converge_diagnostic(cfg: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let needed = KS_C_05 * (2.0 / cfg.replicates as f64).sqrt();
    if needed > cfg.ks_resolution {
        return Err(ExperimentError::InsufficientReplicates(format!(
            "{} replicates resolve KS distances of {needed:.4} at the 5% level, above the requested {}",
            cfg.replicates, cfg.ks_resolution
        )));
    }
    let family = build_family(&cfg.family_spec())?;
    let law = cfg.offspring_law(0);
    let probes: Vec<Probe> = cfg.probe_times.iter().flat_map(|&t| cfg.probes().into_iter().map(move |x| Probe { t, x })).collect();
    let mut report = DiagnosticReport::new(cfg);
    let mut header = String::from("k,replicate,t");
    for i in 0..cfg.d {
        header += &format!(",x{}", i + 1);
    }
    header += ",y\n";
    let mut csv = header;
    let mut samples: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut mean_ok = true;
    let mut mean_detail = Vec::new();
    let mut var_checks = Vec::new();
    for &k in &cfg.ladder {
        let mu = family.generate(k);
        let level = sample_level(cfg, &mu, k, &probes)?;
        for (pi, p) in probes.iter().enumerate() {
            let ys = &level[pi];
            let w: Welford = ys.iter().copied().collect();
            let z = z_against(&w, 0.0).unwrap_or(0.0);
            let mut s = LevelSummary::new(format!("k={k},{}", p.label())).param("k", k as f64).param("t", p.t);
            for (i, v) in p.x.iter().enumerate() {
                s = s.param(&format!("x{}", i + 1), *v);
            }
            s.stat("mean", w.mean());
            s.stat("se", w.se());
            s.stat("mean_z", z);
            let (var, var_se) = variance_with_se(ys);
            s.stat("variance", var);
            s.stat("variance_se", var_se);
            if z.abs() > cfg.z_limit {
                mean_ok = false;
            }
            mean_detail.push(format!("k={k} {}: z={z:.3}", p.label()));
            let n = generations(k, p.t);
            let scale2 = local_time_scale(k, cfg.d).powi(2);
            match variance_oracle(&mu, &law, n, probe_site(k, &p.x), cfg.variance_budget)? {
                Some(v) => {
                    let oracle = v / scale2;
                    let vz = if var_se > 0.0 { (var - oracle) / var_se } else if (var - oracle).abs() < 1e-15 { 0.0 } else { f64::INFINITY };
                    s.stat("variance_oracle", oracle);
                    s.stat("variance_z", vz);
                    var_checks.push((format!("k={k} {}", p.label()), vz));
                }
                None => s.stat("variance_oracle", f64::NAN),
            }
            report.levels.push(s);
            for (r, y) in ys.iter().enumerate() {
                csv += &format!("{k},{r},{}", p.t);
                for v in &p.x {
                    csv += &format!(",{v}");
                }
                csv += &format!(",{y}\n");
            }
        }
        samples.push(level);
    }
    report.checks.push(Check::new("mean_zero", Verdict::from_bool(mean_ok), mean_detail.join("; ")));
    if var_checks.is_empty() {
        report.checks.push(Check::new("variance_oracle", Verdict::Report, "no probe within the oracle budget"));
    } else {
        let ok = var_checks.iter().all(|v| v.1.abs() <= cfg.z_limit);
        let detail: Vec<String> = var_checks.iter().map(|(l, z)| format!("{l}: z={z:.3}")).collect();
        report.checks.push(Check::new("variance_oracle", Verdict::from_bool(ok), detail.join("; ")));
    }
    let mut trend = Vec::new();
    for (pi, p) in probes.iter().enumerate() {
        let mut ds = Vec::new();
        for li in 1..cfg.ladder.len() {
            let a = &samples[li - 1][pi];
            let b = &samples[li][pi];
            let ks = ks_statistic(a, b);
            ds.push(ks);
            report.distances.push(Distance {
                probe: p.label(),
                from: format!("k={}", cfg.ladder[li - 1]),
                to: format!("k={}", cfg.ladder[li]),
                ks,
                p_value: ks_pvalue(ks, a.len(), b.len()),
            });
        }
        // Two levels give a single distance: no trend to judge.
        let v = if ds.len() < 2 { Verdict::Inconclusive } else { non_increasing(&ds) };
        trend.push(v);
        report.checks.push(Check::new(format!("ks_non_increasing[{}]", p.label()), v, fmt_seq(&ds)));
    }
    Ok(Outcome { report: report.finish(), csv: vec![("replicates.csv".into(), csv)] })
}
