//! The importance-sampling battery: modified epidemic against the
//! likelihood-weighted Poisson envelope.

use crate::config::{alpha_star, ExperimentConfig};
use crate::report::{Check, DiagnosticReport, LevelSummary, Verdict};
use crate::{ExperimentError, Outcome};
use brwepi::likelihood::{importance_battery, standard_battery, ImportanceResult, TrajFn};
use brwepi::rng::StreamSeed;
use brwepi::LatticeField;

pub fn run_battery(cfg: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let alpha = cfg.alphas.first().copied().unwrap_or_else(|| alpha_star(cfg.d));
    let mu = LatticeField::point(cfg.d, cfg.initial_mass);
    let battery = standard_battery();
    let fs: Vec<(&str, &TrajFn)> = battery.iter().map(|(id, f)| (*id, f.as_ref())).collect();
    let mut report = DiagnosticReport::new(cfg);
    let mut csv = format!("{}\n", ImportanceResult::CSV_HEADER);
    let mut all: Vec<ImportanceResult> = Vec::new();
    for &n in &cfg.ladder {
        let res = importance_battery(&fs, &mu, n, alpha, cfg.horizon_steps, cfg.replicates, StreamSeed::new(cfg.seed, 0).fork(n))?;
        for r in &res {
            csv += &r.csv_row();
            csv.push('\n');
            let mut s = LevelSummary::new(format!("N={n},{}", r.id)).param("N", n as f64);
            s.stat("lhs", r.lhs);
            s.stat("lhs_se", r.lhs_se);
            s.stat("rhs", r.rhs);
            s.stat("rhs_se", r.rhs_se);
            s.stat("z", r.z.unwrap_or(0.0));
            report.levels.push(s);
        }
        all.extend(res);
    }
    let bad: Vec<String> = all.iter().filter(|r| !r.passes(cfg.z_limit)).map(|r| format!("N={} {}: z={:?}", r.n, r.id, r.z)).collect();
    let detail = if bad.is_empty() { format!("{} comparisons within |z| <= {}", all.len(), cfg.z_limit) } else { bad.join("; ") };
    report.checks.push(Check::new("importance_z", Verdict::from_bool(bad.is_empty()), detail));
    Ok(Outcome { report: report.finish(), csv: vec![("importance.csv".into(), csv)] })
}
