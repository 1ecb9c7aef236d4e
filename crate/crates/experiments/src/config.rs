//! Flat TOML experiment configuration.

use brwepi::brw::OffspringLaw;
use brwepi::family::FamilySpec;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    LocalTime,
    ThresholdSweep,
    OccupationTime,
    BoundsSuite,
    ImportanceBattery,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::LocalTime => "local_time",
            Mode::ThresholdSweep => "threshold_sweep",
            Mode::OccupationTime => "occupation_time",
            Mode::BoundsSuite => "bounds_suite",
            Mode::ImportanceBattery => "importance_battery",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    PointSpreadD2,
    BallBoundedD3,
    RadialSpikeD2,
    SingleSite,
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    /// Poisson(1) offspring.
    Poisson,
    /// Binomial((2d+1)N, 1/((2d+1)N)) arrivals per neighbour, the epidemic envelope.
    Envelope,
}

/// Every key is optional except `mode` and `d`; missing keys take the
/// defaults below, and the resolved values are written into each report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub d: usize,
    /// Scaling indices `k` (local time, occupation) or village sizes `N`
    /// (threshold, importance battery).
    #[serde(default)]
    pub ladder: Vec<u64>,
    /// Exponents for the threshold sweep; `alpha` in the likelihood ratio.
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default = "default_family")]
    pub family: FamilyKind,
    /// Particles per site for `point_spread_d2`.
    #[serde(default = "default_cap")]
    pub family_cap: u64,
    /// `C1`, `C2` for `ball_bounded_d3`.
    #[serde(default = "default_c1")]
    pub family_c1: f64,
    #[serde(default = "default_c2")]
    pub family_c2: u64,
    /// `alpha`, `C` for `radial_spike_d2`.
    #[serde(default = "default_spike_alpha")]
    pub family_alpha: f64,
    #[serde(default = "default_one")]
    pub family_c: f64,
    /// Macroscopic horizon `t`; generations are `floor(k t)`.
    #[serde(default = "default_one")]
    pub horizon_t: f64,
    /// Horizon in generations for the importance battery.
    #[serde(default = "default_horizon_steps")]
    pub horizon_steps: usize,
    /// Macroscopic probe times.
    #[serde(default = "default_probe_times")]
    pub probe_times: Vec<f64>,
    /// Macroscopic probe points; each has `d` coordinates.
    #[serde(default)]
    pub probe_x: Vec<Vec<f64>>,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Where outputs go; like `workers`, left out of the report and hash.
    #[serde(default = "default_out_dir", skip_serializing)]
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every core. Never affects outputs.
    #[serde(default, skip_serializing)]
    pub workers: usize,
    #[serde(default = "default_law")]
    pub law: LawKind,
    /// `|z|` limit for the mean self-checks and the importance battery.
    #[serde(default = "default_z_limit")]
    pub z_limit: f64,
    /// Pooled-SE level the suppression statistic must reach at `alpha*`.
    #[serde(default = "default_suppression_min")]
    pub suppression_min: f64,
    /// Smallest KS distance the replicate count must resolve at the 5% level.
    #[serde(default = "default_ks_resolution")]
    pub ks_resolution: f64,
    /// Largest `steps x cells` product the exact variance oracle may spend.
    #[serde(default = "default_variance_budget")]
    pub variance_budget: u64,
    /// Point mass at the origin for the importance battery.
    #[serde(default = "default_initial_mass")]
    pub initial_mass: u64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Inequality ids for the bounds suite; empty runs all of them.
    #[serde(default)]
    pub inequalities: Vec<String>,
    /// Baseline JSON for the bounds suite, relative to the config file.
    #[serde(default)]
    pub baseline: Option<PathBuf>,
}

fn default_family() -> FamilyKind {
    FamilyKind::PointSpreadD2
}
fn default_cap() -> u64 {
    1
}
fn default_c1() -> f64 {
    1.0
}
fn default_c2() -> u64 {
    1
}
fn default_spike_alpha() -> f64 {
    1.0
}
fn default_one() -> f64 {
    1.0
}
fn default_horizon_steps() -> usize {
    5
}
fn default_probe_times() -> Vec<f64> {
    vec![0.5, 1.0]
}
fn default_replicates() -> u64 {
    10_000
}
fn default_seed() -> u64 {
    1
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_law() -> LawKind {
    LawKind::Poisson
}
fn default_z_limit() -> f64 {
    4.0
}
fn default_suppression_min() -> f64 {
    5.0
}
fn default_ks_resolution() -> f64 {
    0.05
}
fn default_variance_budget() -> u64 {
    200_000_000
}
fn default_initial_mass() -> u64 {
    3
}
fn default_beta() -> f64 {
    0.4
}
fn default_gamma() -> f64 {
    0.25
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

/// `1 / (3 - d/2)`.
pub fn alpha_star(d: usize) -> f64 {
    1.0 / (3.0 - d as f64 / 2.0)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig, toml::de::Error> {
        toml::from_str(text)
    }

    /// Reads and validates a config; a relative `baseline` is resolved
    /// against the config's directory.
    pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        // toml's error display already carries line, column and key.
        let mut cfg = ExperimentConfig::from_toml(&text).map_err(|e| ConfigError::Parse { path: path.into(), message: e.to_string() })?;
        if let Some(b) = &cfg.baseline {
            if b.is_relative() {
                cfg.baseline = Some(path.parent().unwrap_or(Path::new(".")).join(b));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn family_spec(&self) -> FamilySpec {
        match self.family {
            FamilyKind::PointSpreadD2 => FamilySpec::PointSpreadD2 { cap: self.family_cap },
            FamilyKind::BallBoundedD3 => FamilySpec::BallBoundedD3 { c1: self.family_c1, c2: self.family_c2 },
            FamilyKind::RadialSpikeD2 => FamilySpec::RadialSpikeD2 { alpha: self.family_alpha, c: self.family_c },
            FamilyKind::SingleSite => FamilySpec::SingleSite { d: self.d },
            FamilyKind::Empty => FamilySpec::Empty { d: self.d },
        }
    }

    pub fn offspring_law(&self, n_village: u64) -> OffspringLaw {
        match self.law {
            LawKind::Poisson => OffspringLaw::PoissonUnit,
            LawKind::Envelope => OffspringLaw::EnvelopeN(n_village),
        }
    }

    /// Probe points, defaulting to the origin.
    pub fn probes(&self) -> Vec<Vec<f64>> {
        if self.probe_x.is_empty() {
            vec![vec![0.0; self.d]]
        } else {
            self.probe_x.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.d != 2 && self.d != 3 {
            return Err(invalid("d", format!("must be 2 or 3, got {}", self.d)));
        }
        if self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("ladder", "must be strictly increasing"));
        }
        if self.mode != Mode::BoundsSuite && self.ladder.is_empty() {
            return Err(invalid("ladder", "must not be empty"));
        }
        if self.alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("alphas", "must be strictly increasing"));
        }
        if self.replicates == 0 && self.mode != Mode::BoundsSuite {
            return Err(invalid("replicates", "must be positive"));
        }
        if !(self.horizon_t >= 0.0) || !self.horizon_t.is_finite() {
            return Err(invalid("horizon_t", "must be a finite non-negative number"));
        }
        if self.probe_times.iter().any(|&t| !(t >= 0.0) || t > self.horizon_t) {
            return Err(invalid("probe_times", format!("must lie in [0, horizon_t = {}]", self.horizon_t)));
        }
        if self.probe_x.iter().any(|x| x.len() != self.d) {
            return Err(invalid("probe_x", format!("every probe needs {} coordinates", self.d)));
        }
        let fam_d = match self.family {
            FamilyKind::PointSpreadD2 | FamilyKind::RadialSpikeD2 => 2,
            FamilyKind::BallBoundedD3 => 3,
            FamilyKind::SingleSite | FamilyKind::Empty => self.d,
        };
        let uses_family = matches!(self.mode, Mode::LocalTime | Mode::ThresholdSweep | Mode::OccupationTime);
        if uses_family && fam_d != self.d {
            return Err(invalid("family", format!("{:?} lives in d = {fam_d}, config has d = {}", self.family, self.d)));
        }
        match self.mode {
            Mode::ThresholdSweep => {
                if self.alphas.is_empty() {
                    return Err(invalid("alphas", "threshold_sweep needs at least one exponent"));
                }
                let top = alpha_star(self.d);
                if let Some(a) = self.alphas.iter().find(|&&a| !(a > 0.0) || a > top + 1e-12) {
                    return Err(invalid("alphas", format!("{a} outside (0, 1/(3 - d/2)] = (0, {top}]")));
                }
                if self.probe_times.is_empty() {
                    return Err(invalid("probe_times", "threshold_sweep needs probe times"));
                }
                if self.ladder.iter().any(|&n| n < 2) {
                    return Err(invalid("ladder", "village sizes must be at least 2"));
                }
            }
            Mode::OccupationTime => {
                if self.d != 2 {
                    return Err(invalid("d", "occupation_time is defined for d = 2"));
                }
            }
            Mode::LocalTime => {
                if self.probe_times.is_empty() {
                    return Err(invalid("probe_times", "local_time needs probe times"));
                }
                if !(self.ks_resolution > 0.0 && self.ks_resolution < 1.0) {
                    return Err(invalid("ks_resolution", "must lie in (0, 1)"));
                }
            }
            Mode::ImportanceBattery => {
                if self.d != 2 {
                    return Err(invalid("d", "the importance battery is defined for d = 2"));
                }
                if self.alphas.len() > 1 {
                    return Err(invalid("alphas", "the importance battery takes a single exponent"));
                }
                if self.horizon_steps == 0 {
                    return Err(invalid("horizon_steps", "must be positive"));
                }
            }
            Mode::BoundsSuite => {
                if !(self.beta > 0.0 && self.beta <= 0.5) {
                    return Err(invalid("beta", "must lie in (0, 1/2]"));
                }
                if !(self.gamma > 0.0 && self.gamma < 1.0) {
                    return Err(invalid("gamma", "must lie in (0, 1)"));
                }
                for id in &self.inequalities {
                    if brwepi::kernel::bounds::Inequality::parse(id).is_none() {
                        return Err(invalid("inequalities", format!("unknown inequality `{id}`")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_toml("mode = \"local_time\"\nd = 2\nladder = [16, 64]\n").unwrap();
        c.validate().unwrap();
        assert_eq!(c.probes(), vec![vec![0.0, 0.0]]);
        assert_eq!(c.z_limit, 4.0);
        assert_eq!(c.family_spec(), FamilySpec::PointSpreadD2 { cap: 1 });
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml("mode = \"local_time\"\nd = 2\nladdr = [1]\n").is_err());
        let bad = |s: &str| ExperimentConfig::from_toml(s).unwrap().validate().is_err();
        assert!(bad("mode = \"local_time\"\nd = 2\nladder = [64, 16]\n"));
        assert!(bad("mode = \"threshold_sweep\"\nd = 2\nladder = [1000]\nalphas = [0.6]\n"));
        assert!(!bad("mode = \"threshold_sweep\"\nd = 2\nladder = [1000]\nalphas = [0.5]\n"));
        assert!(!bad("mode = \"threshold_sweep\"\nd = 3\nladder = [1000]\nalphas = [0.6]\nfamily = \"ball_bounded_d3\"\n"));
        assert!(bad("mode = \"occupation_time\"\nd = 3\nladder = [64]\nfamily = \"ball_bounded_d3\"\n"));
        assert!(bad("mode = \"local_time\"\nd = 3\nladder = [64]\n"));
        assert!(bad("mode = \"bounds_suite\"\nd = 2\ninequalities = [\"nope\"]\n"));
    }

    #[test]
    fn alpha_star_values() {
        assert_eq!(alpha_star(2), 0.5);
        assert!((alpha_star(3) - 2.0 / 3.0).abs() < 1e-15);
    }
}
