//! The versioned JSON report and the pure trend verdicts.

use crate::config::ExperimentConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Report,
    Inconclusive,
    Fail,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Report => "REPORT",
            Verdict::Inconclusive => "INCONCLUSIVE",
            Verdict::Fail => "FAIL",
        }
    }

    pub fn from_bool(ok: bool) -> Verdict {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the resolved config as JSON.
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub config: ExperimentConfig,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Provenance {
        Provenance { config_hash: config_hash(cfg), seed: cfg.seed, code_version: env!("CARGO_PKG_VERSION").to_string(), config: cfg.clone() }
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Summary statistics of one ladder level (and probe, where relevant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub label: String,
    pub params: BTreeMap<String, f64>,
    pub stats: BTreeMap<String, f64>,
}

impl LevelSummary {
    pub fn new(label: impl Into<String>) -> LevelSummary {
        LevelSummary { label: label.into(), params: BTreeMap::new(), stats: BTreeMap::new() }
    }

    pub fn param(mut self, k: &str, v: f64) -> LevelSummary {
        self.params.insert(k.into(), v);
        self
    }

    pub fn stat(&mut self, k: &str, v: f64) {
        self.stats.insert(k.into(), v);
    }
}

/// A two-sample distance between consecutive levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub probe: String,
    pub from: String,
    pub to: String,
    pub ks: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, verdict: Verdict, detail: impl Into<String>) -> Check {
        Check { name: name.into(), verdict, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub schema_version: u32,
    pub mode: String,
    pub provenance: Provenance,
    pub levels: Vec<LevelSummary>,
    pub distances: Vec<Distance>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
}

impl DiagnosticReport {
    pub fn new(cfg: &ExperimentConfig) -> DiagnosticReport {
        DiagnosticReport {
            schema_version: SCHEMA_VERSION,
            mode: cfg.mode.name().into(),
            provenance: Provenance::of(cfg),
            levels: Vec::new(),
            distances: Vec::new(),
            checks: Vec::new(),
            verdict: Verdict::Report,
        }
    }

    /// Recomputes the overall verdict from the checks: any FAIL fails, then
    /// INCONCLUSIVE, then PASS; a report without graded checks is REPORT.
    pub fn finish(mut self) -> DiagnosticReport {
        self.verdict = overall(self.checks.iter().map(|c| c.verdict));
        self
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn level(&self, label: &str) -> Option<&LevelSummary> {
        self.levels.iter().find(|l| l.label == label)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// `MODE VERDICT (n checks: ...)`.
    pub fn summary_line(&self) -> String {
        let parts: Vec<String> = self.checks.iter().map(|c| format!("{}={}", c.name, c.verdict.label())).collect();
        format!("{} {} [{}]", self.mode, self.verdict.label(), parts.join(", "))
    }
}

pub fn overall(vs: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut out = Verdict::Report;
    for v in vs {
        out = match (out, v) {
            (_, Verdict::Fail) | (Verdict::Fail, _) => Verdict::Fail,
            (_, Verdict::Inconclusive) | (Verdict::Inconclusive, _) => Verdict::Inconclusive,
            (_, Verdict::Pass) | (Verdict::Pass, _) => Verdict::Pass,
            _ => Verdict::Report,
        };
    }
    out
}

/// PASS if `xs[i+1] <= xs[i]` throughout; INCONCLUSIVE for fewer than two points.
pub fn non_increasing(xs: &[f64]) -> Verdict {
    if xs.len() < 2 {
        return Verdict::Inconclusive;
    }
    Verdict::from_bool(xs.windows(2).all(|w| w[1] <= w[0]))
}

/// PASS if `xs[i+1] < xs[i]` throughout; INCONCLUSIVE for fewer than two points.
pub fn strictly_decreasing(xs: &[f64]) -> Verdict {
    if xs.len() < 2 {
        return Verdict::Inconclusive;
    }
    Verdict::from_bool(xs.windows(2).all(|w| w[1] < w[0]))
}

/// Joins floats for a detail string.
pub fn fmt_seq(xs: &[f64]) -> String {
    let v: Vec<String> = xs.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", v.join(", "))
}
