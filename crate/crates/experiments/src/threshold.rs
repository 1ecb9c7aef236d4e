//! Matched SIR and envelope runs across village sizes: the suppression
//! statistic and the coupling-error medians.

use crate::config::{alpha_star, ExperimentConfig};
use crate::local_time::generations;
use crate::report::{fmt_seq, non_increasing, strictly_decreasing, Check, DiagnosticReport, LevelSummary, Verdict};
use crate::{ExperimentError, Outcome};
use brwepi::brw::{OffspringLaw, DEFAULT_GUARD};
use brwepi::family::build_family;
use brwepi::rng::StreamSeed;
use brwepi::sir::{coupled_run, CoupledOptions, CoupledRun};
use brwepi::stats::{median, two_sample_z, Welford};
use rayon::prelude::*;

/// Initial scale `round(N^alpha)`, at least one.
pub fn initial_scale(n: u64, alpha: f64) -> u64 {
    ((n as f64).powf(alpha).round() as u64).max(1)
}

/// Per-level results of the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepLevel {
    pub alpha: f64,
    pub n: u64,
    pub k: u64,
    /// `(envelope mean, SIR mean, suppression z)` per probe time.
    pub probes: Vec<(f64, f64, f64)>,
    pub median_collisions: f64,
    pub median_discrepancy: f64,
}

impl SweepLevel {
    pub fn max_suppression(&self) -> f64 {
        self.probes.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_suppression(&self) -> f64 {
        self.probes.iter().map(|p| p.2.abs()).fold(0.0, f64::max)
    }
}

fn run_level(cfg: &ExperimentConfig, alpha: f64, n: u64) -> Result<(SweepLevel, Vec<CoupledRun>), ExperimentError> {
    let family = build_family(&cfg.family_spec())?;
    let k = initial_scale(n, alpha);
    let mu = family.generate(k);
    let tmax = cfg.probe_times.iter().copied().fold(0.0, f64::max);
    let horizon = generations(k, tmax);
    let opts = CoupledOptions { law: OffspringLaw::EnvelopeN(n), guard: DEFAULT_GUARD, keep_fields: false };
    let master = StreamSeed::new(cfg.seed, 0).fork(n).master;
    let runs: Vec<CoupledRun> =
        (0..cfg.replicates).into_par_iter().map(|r| coupled_run(&mu, n, alpha, horizon, StreamSeed::new(master, r), &opts)).collect::<brwepi::Result<_>>()?;
    let kf = k as f64;
    let probes = cfg
        .probe_times
        .iter()
        .map(|&t| {
            let g = generations(k, t);
            let env: Welford = runs.iter().map(|r| r.envelope_mass[g] as f64 / kf).collect();
            let sir: Welford = runs.iter().map(|r| r.std_mass[g] as f64 / kf).collect();
            (env.mean(), sir.mean(), two_sample_z(&env, &sir).unwrap_or(0.0))
        })
        .collect();
    let c: Vec<f64> = runs.iter().map(|r| r.scaled_collisions()).collect();
    let dsc: Vec<f64> = runs.iter().map(|r| r.scaled_discrepancy()).collect();
    Ok((SweepLevel { alpha, n, k, probes, median_collisions: median(&c), median_discrepancy: median(&dsc) }, runs))
}

pub fn threshold_sweep(cfg: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let star = alpha_star(cfg.d);
    let mut report = DiagnosticReport::new(cfg);
    let mut runs_csv = format!("{}\n", CoupledRun::CSV_HEADER);
    let mut curves = String::from("alpha,N,k,t,envelope_mean,sir_mean,suppression\n");
    let mut by_alpha: Vec<Vec<SweepLevel>> = Vec::new();
    for &alpha in &cfg.alphas {
        let mut levels = Vec::new();
        for &n in &cfg.ladder {
            let (lv, runs) = run_level(cfg, alpha, n)?;
            for (r, run) in runs.iter().enumerate() {
                runs_csv += &run.csv_row(r as u64, cfg.d);
                runs_csv.push('\n');
            }
            let mut s = LevelSummary::new(format!("alpha={alpha},N={n}")).param("alpha", alpha).param("N", n as f64).param("k", lv.k as f64);
            for (&t, p) in cfg.probe_times.iter().zip(&lv.probes) {
                curves += &format!("{alpha},{n},{},{t},{},{},{}\n", lv.k, p.0, p.1, p.2);
                s.stat(&format!("envelope_mean[t={t}]"), p.0);
                s.stat(&format!("sir_mean[t={t}]"), p.1);
                s.stat(&format!("suppression[t={t}]"), p.2);
            }
            s.stat("median_scaled_collisions", lv.median_collisions);
            s.stat("median_scaled_discrepancy", lv.median_discrepancy);
            report.levels.push(s);
            levels.push(lv);
        }
        by_alpha.push(levels);
    }
    for (levels, &alpha) in by_alpha.iter().zip(&cfg.alphas) {
        let at_star = (alpha - star).abs() < 1e-12;
        if at_star {
            let zs: Vec<f64> = levels.iter().map(|l| l.max_suppression()).collect();
            let ok = zs.iter().all(|&z| z >= cfg.suppression_min);
            report.checks.push(Check::new(format!("suppression_bounded_away[alpha={alpha}]"), Verdict::from_bool(ok), fmt_seq(&zs)));
            let c: Vec<f64> = levels.iter().map(|l| l.median_collisions).collect();
            let d: Vec<f64> = levels.iter().map(|l| l.median_discrepancy).collect();
            report.checks.push(Check::new(format!("collisions_decreasing[alpha={alpha}]"), strictly_decreasing(&c), fmt_seq(&c)));
            report.checks.push(Check::new(format!("discrepancy_decreasing[alpha={alpha}]"), strictly_decreasing(&d), fmt_seq(&d)));
        } else {
            let zs: Vec<f64> = levels.iter().map(|l| l.max_abs_suppression()).collect();
            let v = match non_increasing(&zs) {
                Verdict::Pass if zs.last().is_some_and(|&z| z > cfg.z_limit) => Verdict::Fail,
                v => v,
            };
            report.checks.push(Check::new(format!("suppression_vanishing[alpha={alpha}]"), v, fmt_seq(&zs)));
        }
    }
    Ok(Outcome { report: report.finish(), csv: vec![("replicates.csv".into(), runs_csv), ("curves.csv".into(), curves)] })
}
