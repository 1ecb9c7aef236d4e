//! The kernel inequality suite against stored baseline constants.

use crate::config::ExperimentConfig;
use crate::report::{Check, DiagnosticReport, LevelSummary, Verdict};
use crate::{ExperimentError, Outcome};
use brwepi::kernel::bounds::{verify_bounds, BoundParams, BoundReport, Inequality};
use brwepi::kernel::cache::load_or_build;
use brwepi::{KernelTable, WalkSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Allowed growth of a constant over its baseline.
pub const BASELINE_SLACK: f64 = 1.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub d: usize,
    pub beta: f64,
    pub gamma: f64,
    pub constants: BTreeMap<String, f64>,
}

impl Baseline {
    pub fn from_reports(d: usize, beta: f64, gamma: f64, reports: &[BoundReport]) -> Baseline {
        let constants = reports.iter().filter(|r| r.inequality != Inequality::FgCentral).map(|r| (r.inequality.id().to_string(), r.constant)).collect();
        Baseline { d, beta, gamma, constants }
    }

    pub fn load(path: &Path) -> Result<Baseline, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))
    }
}

/// PASS if the constant stays below `baseline * 1.01`; `fg_central` must
/// pass its own exhaustive check instead. REPORT without a baseline.
pub fn judge(report: &BoundReport, baseline: Option<&Baseline>) -> (Verdict, String) {
    if report.inequality == Inequality::FgCentral {
        return (Verdict::from_bool(report.passed), format!("max ratio {} over {} points", report.constant, report.points));
    }
    if let Some(z) = &report.zero_rhs {
        return (Verdict::Fail, format!("RHS vanishes with LHS {} at {:?}", z.lhs, z.x));
    }
    match baseline.and_then(|b| b.constants.get(report.inequality.id())) {
        Some(&b) => (Verdict::from_bool(report.constant <= b * BASELINE_SLACK), format!("constant {} vs baseline {b}", report.constant)),
        None => (Verdict::Report, format!("constant {} (no baseline)", report.constant)),
    }
}

pub fn selected(cfg: &ExperimentConfig) -> Vec<Inequality> {
    if cfg.inequalities.is_empty() {
        Inequality::ALL.to_vec()
    } else {
        cfg.inequalities.iter().filter_map(|s| Inequality::parse(s)).collect()
    }
}

pub fn bounds_suite(cfg: &ExperimentConfig, kernel_cache: Option<&Path>) -> Result<Outcome, ExperimentError> {
    let mut params = BoundParams::standard(cfg.d);
    params.beta = cfg.beta;
    params.gamma = cfg.gamma;
    let spec = WalkSpec { d: cfg.d };
    let table = match kernel_cache {
        Some(p) => load_or_build(spec, params.table_horizon(), p)?,
        None => KernelTable::build(spec, params.table_horizon())?,
    };
    let baseline = cfg.baseline.as_deref().map(Baseline::load).transpose()?;
    if let Some(b) = &baseline {
        if b.d != cfg.d || b.beta != cfg.beta || b.gamma != cfg.gamma {
            return Err(ExperimentError::Io(format!("baseline was recorded for d={}, beta={}, gamma={}", b.d, b.beta, b.gamma)));
        }
    }
    let mut report = DiagnosticReport::new(cfg);
    let mut csv = String::from("inequality,d,beta,gamma,n_min,n_max,box_radius,points,constant,baseline,verdict\n");
    let mut reports = Vec::new();
    for which in selected(cfg) {
        let r = verify_bounds(&table, which, &params)?;
        let (v, detail) = judge(&r, baseline.as_ref());
        let base = baseline.as_ref().and_then(|b| b.constants.get(which.id())).map_or(String::new(), |b| b.to_string());
        csv += &format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            which.id(),
            r.d,
            r.beta,
            r.gamma,
            r.n_range.0,
            r.n_range.1,
            r.box_radius,
            r.points,
            r.constant,
            base,
            v.label()
        );
        let mut s = LevelSummary::new(which.id()).param("n_min", r.n_range.0 as f64).param("n_max", r.n_range.1 as f64);
        s.stat("constant", r.constant);
        s.stat("points", r.points as f64);
        report.levels.push(s);
        report.checks.push(Check::new(which.id(), v, detail));
        reports.push(r);
    }
    let fresh = Baseline::from_reports(cfg.d, cfg.beta, cfg.gamma, &reports);
    let bounds_json = serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n";
    let baseline_json = serde_json::to_string_pretty(&fresh).expect("baseline serializes") + "\n";
    Ok(Outcome { report: report.finish(), csv: vec![("bounds.csv".into(), csv), ("bound_reports.json".into(), bounds_json), ("baseline.json".into(), baseline_json)] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use brwepi::kernel::bounds::Witness;

    fn fake(which: Inequality, constant: f64, passed: bool) -> BoundReport {
        BoundReport {
            inequality: which,
            d: 2,
            beta: 0.4,
            gamma: 0.25,
            n_range: (1, 4),
            box_radius: 3,
            constant,
            witness: Witness::default(),
            points: 10,
            zero_rhs: None,
            passed,
        }
    }

    #[test]
    fn judged_against_baseline() {
        let b = Baseline { d: 2, beta: 0.4, gamma: 0.25, constants: [("conv".to_string(), 2.0)].into_iter().collect() };
        assert_eq!(judge(&fake(Inequality::Conv, 2.02, true), Some(&b)).0, Verdict::Pass);
        assert_eq!(judge(&fake(Inequality::Conv, 2.03, true), Some(&b)).0, Verdict::Fail);
        assert_eq!(judge(&fake(Inequality::ConvB, 9.0, true), Some(&b)).0, Verdict::Report);
        assert_eq!(judge(&fake(Inequality::FgCentral, 0.9, true), None).0, Verdict::Pass);
        assert_eq!(judge(&fake(Inequality::FgCentral, 1.1, false), Some(&b)).0, Verdict::Fail);
    }
}
