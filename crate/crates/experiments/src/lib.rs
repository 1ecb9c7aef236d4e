//! Reproducible experiment runner on top of `brwepi`: configuration,
//! diagnostics per mode, and CSV/JSON emission.
//!
//! Every mode derives replicate streams from `(seed, level, replicate)` and
//! reduces results in replicate order, so outputs do not depend on the
//! number of worker threads.

pub mod battery;
pub mod bounds;
pub mod config;
pub mod local_time;
pub mod occupation;
pub mod report;
pub mod threshold;
pub mod tools;

use config::{ConfigError, ExperimentConfig, Mode};
use report::{DiagnosticReport, Verdict};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] brwepi::Error),
    #[error("insufficient replicates: {0}")]
    InsufficientReplicates(String),
    #[error("config mode is {found}, this command runs {expected}")]
    ModeMismatch { expected: &'static str, found: &'static str },
    #[error("{0}")]
    Io(String),
}

impl ExperimentError {
    /// 2 for configuration problems, 3 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::ModeMismatch { .. } | ExperimentError::InsufficientReplicates(_) => 2,
            _ => 3,
        }
    }
}

/// A finished report plus the CSV (and auxiliary) files to write beside it.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: DiagnosticReport,
    pub csv: Vec<(String, String)>,
}

impl Outcome {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.csv.iter().find(|f| f.0 == name).map(|f| f.1.as_str())
    }

    /// Writes `report.json` and every CSV into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        let err = |p: &Path, e: std::io::Error| ExperimentError::Io(format!("{}: {e}", p.display()));
        std::fs::create_dir_all(dir).map_err(|e| err(dir, e))?;
        let p = dir.join("report.json");
        std::fs::write(&p, self.report.to_json()).map_err(|e| err(&p, e))?;
        for (name, text) in &self.csv {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| err(&p, e))?;
        }
        Ok(())
    }
}

/// Overrides taken from the command line.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub kernel_cache: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
    }
}

/// Runs the experiment a config describes on a pool of `cfg.workers` threads.
pub fn run_config(cfg: &ExperimentConfig, kernel_cache: Option<&Path>) -> Result<Outcome, ExperimentError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().map_err(|e| ExperimentError::Io(e.to_string()))?;
    pool.install(|| match cfg.mode {
        Mode::LocalTime => local_time::converge_diagnostic(cfg),
        Mode::ThresholdSweep => threshold::threshold_sweep(cfg),
        Mode::OccupationTime => occupation::occupation_time_stat(cfg),
        Mode::BoundsSuite => bounds::bounds_suite(cfg, kernel_cache),
        Mode::ImportanceBattery => battery::run_battery(cfg),
    })
}

/// Loads, runs and writes one experiment. `expected` pins the mode for the
/// mode-specific subcommands.
pub fn run(config_path: &Path, expected: Option<Mode>, overrides: &Overrides) -> Result<DiagnosticReport, ExperimentError> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    overrides.apply(&mut cfg);
    if let Some(m) = expected {
        if m != cfg.mode {
            return Err(ExperimentError::ModeMismatch { expected: m.name(), found: cfg.mode.name() });
        }
    }
    let out = run_config(&cfg, overrides.kernel_cache.as_deref())?;
    out.write(&cfg.out_dir)?;
    Ok(out.report)
}

/// 0 for PASS, REPORT and INCONCLUSIVE, 1 when a check failed.
pub fn verdict_exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Fail => 1,
        _ => 0,
    }
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
