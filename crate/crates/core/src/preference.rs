//! Shared domain types: system identifiers, comparison outcomes, preference
//! matrices, win counts and Copeland scores.
//!
//! System `i` *beats* system `j` when `p_ij > 1/2` (strictly). The Condorcet
//! winner beats every other system; the Copeland score of `i` is the fraction
//! of opponents it beats:
//!
//! ```text
//! C_i = 1/(k-1) * |{ j != i : p_ij > 1/2 }|
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when validating `p_ij + p_ji = 1`.
const ANTISYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreferenceError {
    #[error("system index {index} out of range for k = {k}")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("a pair must name two distinct systems, got ({0}, {0})")]
    SelfPair(usize),
    #[error("need at least 2 systems, got {0}")]
    TooFewSystems(usize),
    #[error("invalid preference matrix: {0}")]
    InvalidMatrix(String),
    #[error("outcome value must be 0, 0.5 or 1, got {0}")]
    InvalidOutcome(f64),
}

/// Dense index of a system within a session, in `[0, k)`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SystemId(pub usize);

impl SystemId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for SystemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for SystemId {
    fn from(i: usize) -> Self {
        SystemId(i)
    }
}

/// Result of one duel, from the point of view of the first system of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "f64", try_from = "f64")]
pub enum Verdict {
    /// The second system won (`w = 0`).
    Loss,
    /// `w = 0.5`.
    Tie,
    /// The first system won (`w = 1`).
    Win,
}

impl Verdict {
    pub fn value(self) -> f64 {
        match self {
            Verdict::Loss => 0.0,
            Verdict::Tie => 0.5,
            Verdict::Win => 1.0,
        }
    }

    /// The same verdict seen from the other system's side.
    pub fn flip(self) -> Self {
        match self {
            Verdict::Loss => Verdict::Win,
            Verdict::Tie => Verdict::Tie,
            Verdict::Win => Verdict::Loss,
        }
    }

    pub fn from_value(v: f64) -> Result<Self, PreferenceError> {
        if v == 0.0 {
            Ok(Verdict::Loss)
        } else if v == 0.5 {
            Ok(Verdict::Tie)
        } else if v == 1.0 {
            Ok(Verdict::Win)
        } else {
            Err(PreferenceError::InvalidOutcome(v))
        }
    }
}

impl From<Verdict> for f64 {
    fn from(v: Verdict) -> f64 {
        v.value()
    }
}

impl TryFrom<f64> for Verdict {
    type Error = PreferenceError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Verdict::from_value(v)
    }
}

/// Who produced an outcome. Only human outcomes count as annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Human,
    Model,
}

/// One duel result plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    pub first: SystemId,
    pub second: SystemId,
    pub verdict: Verdict,
    pub source: Source,
    pub example_id: String,
}

impl ComparisonOutcome {
    pub fn new(
        first: SystemId,
        second: SystemId,
        verdict: Verdict,
        source: Source,
        example_id: impl Into<String>,
    ) -> Self {
        ComparisonOutcome {
            first,
            second,
            verdict,
            source,
            example_id: example_id.into(),
        }
    }

    pub fn value(&self) -> f64 {
        self.verdict.value()
    }

    pub fn pair(&self) -> (SystemId, SystemId) {
        (self.first, self.second)
    }

    /// Same outcome with the pair order reversed.
    pub fn swapped(&self) -> Self {
        ComparisonOutcome {
            first: self.second,
            second: self.first,
            verdict: self.verdict.flip(),
            source: self.source,
            example_id: self.example_id.clone(),
        }
    }
}

/// Anything that exposes pairwise preference probabilities over `k` systems.
pub trait Preferences {
    fn k(&self) -> usize;
    /// Probability (true or estimated) that `i` is preferred over `j`.
    fn prob(&self, i: usize, j: usize) -> f64;
}

/// `k x k` matrix of pairwise win probabilities with `p_ij + p_ji = 1` and
/// `p_ii = 1/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceMatrix {
    k: usize,
    p: Vec<f64>,
}

impl PreferenceMatrix {
    /// Builds a matrix from row-major entries, validating every invariant.
    pub fn new(k: usize, p: Vec<f64>) -> Result<Self, PreferenceError> {
        if k < 2 {
            return Err(PreferenceError::TooFewSystems(k));
        }
        if p.len() != k * k {
            return Err(PreferenceError::InvalidMatrix(format!(
                "expected {} entries, got {}",
                k * k,
                p.len()
            )));
        }
        for i in 0..k {
            for j in 0..k {
                let pij = p[i * k + j];
                if !(0.0..=1.0).contains(&pij) || pij.is_nan() {
                    return Err(PreferenceError::InvalidMatrix(format!(
                        "p[{i}][{j}] = {pij} is not a probability"
                    )));
                }
                if i == j && pij != 0.5 {
                    return Err(PreferenceError::InvalidMatrix(format!(
                        "diagonal entry p[{i}][{i}] = {pij} must be 0.5"
                    )));
                }
                if (pij + p[j * k + i] - 1.0).abs() > ANTISYMMETRY_TOL {
                    return Err(PreferenceError::InvalidMatrix(format!(
                        "p[{i}][{j}] + p[{j}][{i}] != 1"
                    )));
                }
            }
        }
        Ok(PreferenceMatrix { k, p })
    }

    /// Builds a matrix from the strict upper triangle: `upper(i, j)` is called
    /// for `i < j` and the lower triangle is filled by antisymmetry.
    pub fn from_upper(
        k: usize,
        mut upper: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, PreferenceError> {
        let mut p = vec![0.5; k * k];
        for i in 0..k {
            for j in (i + 1)..k {
                let v = upper(i, j);
                p[i * k + j] = v;
                p[j * k + i] = 1.0 - v;
            }
        }
        Self::new(k, p)
    }

    /// Bradley-Terry-Luce matrix `p_ij = u_i / (u_i + u_j)`.
    pub fn from_btl(utilities: &[f64]) -> Result<Self, PreferenceError> {
        if let Some(u) = utilities.iter().find(|u| !(**u > 0.0) || !u.is_finite()) {
            return Err(PreferenceError::InvalidMatrix(format!(
                "BTL utilities must be strictly positive, got {u}"
            )));
        }
        Self::from_upper(utilities.len(), |i, j| {
            utilities[i] / (utilities[i] + utilities[j])
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.k + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.p.chunks(self.k)
    }

    /// Smallest `|p_ij - 1/2|` over all distinct pairs.
    pub fn min_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for i in 0..self.k {
            for j in (i + 1)..self.k {
                gap = gap.min((self.get(i, j) - 0.5).abs());
            }
        }
        gap
    }
}

impl Preferences for PreferenceMatrix {
    fn k(&self) -> usize {
        self.k
    }
    fn prob(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

/// Sufficient statistics of all duels so far.
///
/// `wins[i][j]` is the (possibly fractional) number of duels `i` won against
/// `j`; ties add `0.5` to both directions. `trials` is symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinCountMatrix {
    k: usize,
    wins: Vec<f64>,
    trials: Vec<u64>,
    total: u64,
}

impl WinCountMatrix {
    pub fn new(k: usize) -> Self {
        WinCountMatrix {
            k,
            wins: vec![0.0; k * k],
            trials: vec![0; k * k],
            total: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn check(&self, s: SystemId) -> Result<usize, PreferenceError> {
        if s.0 < self.k {
            Ok(s.0)
        } else {
            Err(PreferenceError::IndexOutOfRange { index: s.0, k: self.k })
        }
    }

    /// Records one duel. `value` is the first system's score in `{0, 0.5, 1}`.
    pub fn record(
        &mut self,
        first: SystemId,
        second: SystemId,
        verdict: Verdict,
    ) -> Result<(), PreferenceError> {
        let i = self.check(first)?;
        let j = self.check(second)?;
        if i == j {
            return Err(PreferenceError::SelfPair(i));
        }
        let v = verdict.value();
        self.wins[i * self.k + j] += v;
        self.wins[j * self.k + i] += 1.0 - v;
        self.trials[i * self.k + j] += 1;
        self.trials[j * self.k + i] += 1;
        self.total += 1;
        Ok(())
    }

    pub fn update(&mut self, outcome: &ComparisonOutcome) -> Result<(), PreferenceError> {
        self.record(outcome.first, outcome.second, outcome.verdict)
    }

    pub fn wins(&self, i: usize, j: usize) -> f64 {
        self.wins[i * self.k + j]
    }

    pub fn trials(&self, i: usize, j: usize) -> u64 {
        self.trials[i * self.k + j]
    }

    /// Total number of recorded duels.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Empirical `p̂_ij`, or `1/2` before any duel on the pair.
    pub fn p_hat(&self, i: usize, j: usize) -> f64 {
        let n = self.trials(i, j);
        if n == 0 {
            0.5
        } else {
            self.wins(i, j) / n as f64
        }
    }

    /// Drops every duel involving `s`. Used by elimination rules that discard
    /// the history of removed systems.
    pub fn clear_system(&mut self, s: usize) {
        for j in 0..self.k {
            let n = self.trials[s * self.k + j];
            self.total -= n;
            for (a, b) in [(s, j), (j, s)] {
                self.wins[a * self.k + b] = 0.0;
                self.trials[a * self.k + b] = 0;
            }
        }
    }
}

impl Preferences for WinCountMatrix {
    fn k(&self) -> usize {
        self.k
    }
    fn prob(&self, i: usize, j: usize) -> f64 {
        self.p_hat(i, j)
    }
}

/// Normalized Copeland scores, one per system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopelandScores(pub Vec<f64>);

impl CopelandScores {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Highest-scoring system, lowest index on ties.
    pub fn winner(&self) -> SystemId {
        let mut best = 0;
        for (i, &s) in self.0.iter().enumerate() {
            if s > self.0[best] {
                best = i;
            }
        }
        SystemId(best)
    }
}

/// Number of opponents `i` strictly beats.
pub fn copeland_count<P: Preferences + ?Sized>(m: &P, i: usize) -> usize {
    (0..m.k()).filter(|&j| j != i && m.prob(i, j) > 0.5).count()
}

pub fn copeland_scores<P: Preferences + ?Sized>(m: &P) -> CopelandScores {
    let k = m.k();
    let norm = (k - 1) as f64;
    CopelandScores(
        (0..k)
            .map(|i| copeland_count(m, i) as f64 / norm)
            .collect(),
    )
}

/// The system that beats every other one, if any.
pub fn condorcet_winner<P: Preferences + ?Sized>(m: &P) -> Option<SystemId> {
    let k = m.k();
    (0..k)
        .find(|&i| (0..k).all(|j| j == i || m.prob(i, j) > 0.5))
        .map(SystemId)
}

/// Empirical Copeland winner, lowest index on ties.
pub fn copeland_winner<P: Preferences + ?Sized>(m: &P) -> SystemId {
    let k = m.k();
    let mut best = 0;
    let mut best_count = copeland_count(m, 0);
    for i in 1..k {
        let c = copeland_count(m, i);
        if c > best_count {
            best = i;
            best_count = c;
        }
    }
    SystemId(best)
}
