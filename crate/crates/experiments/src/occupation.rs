//! Number of generations in which the origin is occupied.

use crate::config::ExperimentConfig;
use crate::local_time::generations;
use crate::report::{fmt_seq, non_increasing, Check, DiagnosticReport, LevelSummary};
use crate::{ExperimentError, Outcome};
use brwepi::brw::{brw_observe, OffspringLaw, DEFAULT_GUARD};
use brwepi::family::build_family;
use brwepi::rng::StreamSeed;
use brwepi::stats::Welford;
use brwepi::{LatticeField, Site};
use rayon::prelude::*;

/// `#{1 <= m <= n : X_m(0) > 0}` for one replicate.
pub fn occupied_generations(mu: &LatticeField, law: &OffspringLaw, n: usize, seed: StreamSeed) -> brwepi::Result<u64> {
    let mut count = 0;
    if n == 0 || mu.is_empty() {
        return Ok(0);
    }
    brw_observe(mu, law, n, seed, DEFAULT_GUARD, |m, f| {
        if m >= 1 && f.get(Site::ORIGIN) > 0 {
            count += 1;
        }
        !f.is_empty()
    })?;
    Ok(count)
}

/// `r(k) = estimate * log k / k`.
pub fn r_of_k(estimate: f64, k: u64) -> f64 {
    estimate * (k as f64).ln() / k as f64
}

pub fn occupation_time_stat(cfg: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let family = build_family(&cfg.family_spec())?;
    let law = cfg.offspring_law(0);
    let mut report = DiagnosticReport::new(cfg);
    let mut csv = String::from("k,replicate,occupied_generations\n");
    let mut rs = Vec::new();
    for &k in &cfg.ladder {
        let mu = family.generate(k);
        let n = generations(k, cfg.horizon_t);
        let master = StreamSeed::new(cfg.seed, 0).fork(k).master;
        let counts: Vec<u64> =
            (0..cfg.replicates).into_par_iter().map(|r| occupied_generations(&mu, &law, n, StreamSeed::new(master, r))).collect::<brwepi::Result<_>>()?;
        let w: Welford = counts.iter().map(|&c| c as f64).collect();
        for (r, c) in counts.iter().enumerate() {
            csv += &format!("{k},{r},{c}\n");
        }
        let r = r_of_k(w.mean(), k);
        let mut s = LevelSummary::new(format!("k={k}")).param("k", k as f64).param("t", cfg.horizon_t);
        s.stat("estimate", w.mean());
        s.stat("estimate_se", w.se());
        s.stat("r", r);
        s.stat("r_se", r_of_k(w.se(), k));
        report.levels.push(s);
        rs.push(r);
    }
    report.checks.push(Check::new("r_non_increasing", non_increasing(&rs), fmt_seq(&rs)));
    Ok(Outcome { report: report.finish(), csv: vec![("replicates.csv".into(), csv)] })
}
