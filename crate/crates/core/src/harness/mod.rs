//! Measuring learners: seeded simulation runs, annotation complexity,
//! accuracy-versus-budget curves and growth-rate fits.

mod manifest;
mod run;
mod scaling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::EnvironmentError;
use crate::learners::LearnerError;
use crate::model_based::ModelBasedError;
use crate::preference::SystemId;
use crate::probability::ProbabilityError;

pub use manifest::{
    judgment_validation, run_experiment, EnvironmentConfig, Manifest, MetricConfig, MetricSource, ReportBundle, RunConfig,
    RunSummary, MANIFEST_SCHEMA_VERSION,
};
pub use run::{derive_seed, run_seeds, simulate, RunSetup};
pub use scaling::{fit_growth, k_scaling, GrowthFit, LineFit, ScalingPoint, ScalingReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("traces do not share a checkpoint grid: {0}")]
    GridMismatch(String),
    #[error("no traces")]
    NoTraces,
    #[error("environment has no Condorcet winner")]
    NoTruth,
    #[error("{path}: {message}")]
    Manifest { path: String, message: String },
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    ModelBased(#[from] ModelBasedError),
    #[error(transparent)]
    Probability(#[from] ProbabilityError),
    #[error(transparent)]
    Metric(#[from] crate::metric::MetricError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How runs are measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexityConfig {
    pub seeds: usize,
    /// Allowed failure probability; accuracy must exceed `1 - delta_acc`.
    pub delta_acc: f64,
    /// Human annotations per run.
    pub max_budget: u64,
    pub checkpoint_stride: u64,
    /// Hard cap on all feedback (human plus model) per run.
    pub max_feedback: u64,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        ComplexityConfig {
            seeds: 200,
            delta_acc: 0.05,
            max_budget: 50_000,
            checkpoint_stride: 10,
            max_feedback: 2_000_000,
        }
    }
}

impl ComplexityConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds == 0 {
            return Err(HarnessError::Config("seeds must be at least 1".into()));
        }
        if !(self.delta_acc > 0.0 && self.delta_acc < 1.0) {
            return Err(HarnessError::Config(format!("delta_acc = {} outside (0, 1)", self.delta_acc)));
        }
        if self.checkpoint_stride == 0 {
            return Err(HarnessError::Config("checkpoint_stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Checkpoints `0, stride, 2 stride, ..` up to `max_budget`.
    pub fn checkpoints(&self) -> usize {
        (self.max_budget / self.checkpoint_stride) as usize + 1
    }
}

/// Recommendations of one seeded run on the checkpoint grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunTrace {
    pub seed: u64,
    pub stride: u64,
    /// `recommendations[c]` is the recommendation after `c * stride` human
    /// annotations.
    pub recommendations: Vec<SystemId>,
    pub terminal: SystemId,
    pub human_annotations: u64,
    pub model_feedback: u64,
}

impl RunTrace {
    pub fn checkpoint_n(&self, c: usize) -> u64 {
        c as u64 * self.stride
    }
}

/// Annotation complexity of a set of runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complexity {
    /// Smallest checkpoint after which accuracy stays above `1 - delta_acc`.
    pub last_crossing: Option<u64>,
    /// First checkpoint at which accuracy exceeds `1 - delta_acc`.
    pub first_crossing: Option<u64>,
}

fn check_grid(traces: &[RunTrace]) -> Result<(u64, usize), HarnessError> {
    let first = traces.first().ok_or(HarnessError::NoTraces)?;
    let (stride, len) = (first.stride, first.recommendations.len());
    if let Some(t) = traces.iter().find(|t| t.stride != stride || t.recommendations.len() != len) {
        return Err(HarnessError::GridMismatch(format!(
            "seed {} has stride {} and {} checkpoints, expected {stride} and {len}",
            t.seed,
            t.stride,
            t.recommendations.len()
        )));
    }
    Ok((stride, len))
}

/// `(n, fraction of runs recommending truth)` per checkpoint.
pub fn accuracy_curve(traces: &[RunTrace], truth: SystemId) -> Result<Vec<(u64, f64)>, HarnessError> {
    let (stride, len) = check_grid(traces)?;
    let total = traces.len() as f64;
    Ok((0..len)
        .map(|c| {
            let hits = traces.iter().filter(|t| t.recommendations[c] == truth).count();
            (c as u64 * stride, hits as f64 / total)
        })
        .collect())
}

/// Minimum `n'` such that at every checkpoint `n >= n'` the share of runs
/// recommending `truth` exceeds `1 - delta_acc`.
pub fn annotation_complexity(
    traces: &[RunTrace],
    truth: SystemId,
    delta_acc: f64,
) -> Result<Complexity, HarnessError> {
    let curve = accuracy_curve(traces, truth)?;
    let ok = |acc: f64| acc > 1.0 - delta_acc;
    let first_crossing = curve.iter().find(|(_, a)| ok(*a)).map(|(n, _)| *n);
    let mut last_crossing = None;
    for &(n, a) in curve.iter().rev() {
        if ok(a) {
            last_crossing = Some(n);
        } else {
            break;
        }
    }
    Ok(Complexity { last_crossing, first_crossing })
}

/// Accuracy curve as comma-separated `n,accuracy` rows.
pub fn curve_csv(curve: &[(u64, f64)]) -> String {
    let mut out = String::from("n,accuracy\n");
    for (n, a) in curve {
        out.push_str(&format!("{n},{a:.6}\n"));
    }
    out
}
