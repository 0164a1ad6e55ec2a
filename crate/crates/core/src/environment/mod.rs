//! Simulated annotators.
//!
//! A [`PreferenceSource`] answers "which of these two outputs is better?" for
//! a pair of systems, either from recorded judgments ([`JudgmentDataset`]) or
//! from a synthetic model ([`SyntheticSource`], [`ScoredInstance`]). Answers
//! are drawn first and only *revealed* (and counted as human annotations)
//! when the feedback policy actually asks a human.

mod dataset;
mod delay;
mod outputs;
mod scored;
mod synthetic;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::preference::{ComparisonOutcome, PreferenceError, PreferenceMatrix, Source, SystemId, Verdict};

pub use dataset::{JudgmentDataset, JudgmentRecord};
pub use delay::DelayedFeedback;
pub use outputs::{ReferenceRecord, SystemOutputs, SystemOutputRecord};
pub use scored::{ScoredInstance, ScoredInstanceSpec};
pub use synthetic::{Generator, SyntheticSource, SyntheticSpec};

#[derive(Debug, Error)]
pub enum EnvironmentError {
    #[error("no recorded judgments for pairs: {}", format_pairs(.0))]
    Coverage(Vec<(String, String)>),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown system {0:?}")]
    UnknownSystem(String),
    #[error("duplicate system {0:?}")]
    DuplicateSystem(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("dataset has no Condorcet winner")]
    NoCondorcetWinner,
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error(transparent)]
    Metric(#[from] crate::metric::MetricError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("({a}, {b})"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// A drawn but not yet revealed judgment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub first: usize,
    pub second: usize,
    /// Index of the example the judgment is about.
    pub example: usize,
    human: Verdict,
}

impl Draw {
    pub fn new(first: usize, second: usize, example: usize, human: Verdict) -> Self {
        Draw { first, second, example, human }
    }
}

/// Anything that can produce pairwise judgments between `k` systems.
pub trait PreferenceSource: Send + Sync {
    fn k(&self) -> usize;

    /// Draws a judgment of `first` versus `second` (value 1 means `first` won).
    fn draw(&self, first: usize, second: usize, rng: &mut ChaCha8Rng) -> Result<Draw, EnvironmentError>;

    /// Expected outcome matrix `E[w]` the draws follow.
    fn matrix(&self) -> PreferenceMatrix;

    /// Name of example `e`, used in outcome provenance.
    fn example_name(&self, e: usize) -> String {
        e.to_string()
    }

    /// Number of distinct examples.
    fn examples(&self) -> usize {
        1
    }
}

/// Queries one source with its own generator and counts human reveals.
pub struct Annotator<'a> {
    source: &'a dyn PreferenceSource,
    rng: ChaCha8Rng,
    humans: Arc<AtomicU64>,
}

impl<'a> Annotator<'a> {
    pub fn new(source: &'a dyn PreferenceSource, seed: u64) -> Self {
        Self::with_counter(source, seed, Arc::new(AtomicU64::new(0)))
    }

    /// Shares `counter` with other annotators over the same source.
    pub fn with_counter(source: &'a dyn PreferenceSource, seed: u64, counter: Arc<AtomicU64>) -> Self {
        Annotator { source, rng: ChaCha8Rng::seed_from_u64(seed), humans: counter }
    }

    pub fn source(&self) -> &'a dyn PreferenceSource {
        self.source
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn draw(&mut self, first: SystemId, second: SystemId) -> Result<Draw, EnvironmentError> {
        self.source.draw(first.0, second.0, &mut self.rng)
    }

    /// Turns a draw into a human outcome and counts it.
    pub fn reveal(&self, draw: Draw) -> ComparisonOutcome {
        self.humans.fetch_add(1, Ordering::SeqCst);
        ComparisonOutcome::new(
            SystemId(draw.first),
            SystemId(draw.second),
            draw.human,
            Source::Human,
            self.source.example_name(draw.example),
        )
    }

    /// Draw and reveal in one step.
    pub fn query(&mut self, first: SystemId, second: SystemId) -> Result<ComparisonOutcome, EnvironmentError> {
        let d = self.draw(first, second)?;
        Ok(self.reveal(d))
    }

    pub fn human_count(&self) -> u64 {
        self.humans.load(Ordering::SeqCst)
    }
}

/// `n` logical annotators over one source, each with an independent stream,
/// sharing one human counter.
pub struct AnnotatorPool<'a> {
    annotators: Vec<Annotator<'a>>,
    counter: Arc<AtomicU64>,
}

impl<'a> AnnotatorPool<'a> {
    pub fn new(source: &'a dyn PreferenceSource, n: usize, seed: u64) -> Self {
        let counter = Arc::new(AtomicU64::new(0));
        let annotators = (0..n as u64)
            .map(|i| Annotator::with_counter(source, seed.wrapping_mul(0x9E37_79B9).wrapping_add(i), counter.clone()))
            .collect();
        AnnotatorPool { annotators, counter }
    }

    pub fn len(&self) -> usize {
        self.annotators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotators.is_empty()
    }

    pub fn get(&mut self, i: usize) -> &mut Annotator<'a> {
        &mut self.annotators[i]
    }

    pub fn human_count(&self) -> u64 {
        self.counter.load(Ordering::SeqCst)
    }
}
