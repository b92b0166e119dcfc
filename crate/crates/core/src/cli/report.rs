use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{EpochRecord, MetricsReport};
use crate::util::{mean_std, write_atomic};

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Outcome of one method on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub method: String,
    pub best_epoch: Option<usize>,
    pub valid: Option<MetricsReport>,
    pub test: Option<MetricsReport>,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub label: String,
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl Aggregate {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&values);
        Self {
            label: label.into(),
            mean,
            std,
            values,
        }
    }
}

/// One row of the ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub group: String,
    pub variant: String,
    pub beta: f64,
    pub lambda: f64,
    pub relations: String,
    pub test: Aggregate,
    pub final_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportBody {
    Runs { runs: Vec<SeedRun>, summary: Vec<Aggregate> },
    Ablation { rows: Vec<AblationRow> },
    Theory(super::TheoryOutcome),
    Export { ids: Vec<u32>, files: Vec<String> },
}

/// Machine-readable report of one command, with the configuration echo
/// needed to re-run it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub library_version: String,
    pub config: serde_json::Value,
    pub wall_clock_secs: f64,
    pub body: ReportBody,
}

impl RunReport {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("report.json"), &serde_json::to_vec_pretty(self)?)?;
        write_atomic(&dir.join("summary.txt"), self.summary().as_bytes())
    }

    /// Plain-text table of the headline numbers.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} (d3g {})", self.command, self.library_version);
        match &self.body {
            ReportBody::Runs { runs, summary } => {
                let _ = writeln!(s, "{:<6} {:<6} {:>10} {:>10} {:>10}", "seed", "method", "valid", "test", "test_worst");
                for r in runs {
                    let cell = |m: &Option<MetricsReport>| m.as_ref().map_or("-".to_string(), |m| format!("{:.4}", m.mean));
                    let worst = r.test.as_ref().map_or("-".to_string(), |m| format!("{:.4}", m.worst));
                    let _ = writeln!(s, "{:<6} {:<6} {:>10} {:>10} {:>10}", r.seed, r.method, cell(&r.valid), cell(&r.test), worst);
                }
                for a in summary {
                    let _ = writeln!(s, "{:<24} {:.4} +- {:.4} (n={})", a.label, a.mean, a.std, a.values.len());
                }
            }
            ReportBody::Ablation { rows } => {
                let _ = writeln!(s, "{:<12} {:<16} {:>5} {:>6} {:>8} {:>8}", "group", "variant", "beta", "lambda", "mean", "std");
                for r in rows {
                    let _ = writeln!(
                        s,
                        "{:<12} {:<16} {:>5.2} {:>6.2} {:>8.4} {:>8.4}",
                        r.group, r.variant, r.beta, r.lambda, r.test.mean, r.test.std
                    );
                }
            }
            ReportBody::Theory(t) => {
                let _ = writeln!(s, "c0 = {}", t.c0);
                let _ = writeln!(s, "{:>6} {:>10} {:>12} {:>10}", "N_tr", "B", "excess", "stderr");
                for r in &t.scaling {
                    let _ = writeln!(s, "{:>6} {:>10.4} {:>12.6} {:>10.6}", r.n_tr, r.bandwidth, r.mean_excess_risk, r.stderr);
                }
                let a = &t.averaging;
                let _ = writeln!(
                    s,
                    "averaging gap {:.6} +- {:.6} (target {:.5}, n={})",
                    a.estimate.mean, a.estimate.stderr, a.target, a.estimate.samples
                );
            }
            ReportBody::Export { ids, files } => {
                let _ = writeln!(s, "{} domains -> {}", ids.len(), files.join(", "));
            }
        }
        s
    }
}
