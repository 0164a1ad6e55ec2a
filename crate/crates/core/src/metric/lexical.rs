//! Built-in lexical metrics: character n-gram F-score and BLEU-4.
//!
//! Both are computed from additive sufficient statistics, so corpus-level
//! scores are obtained by summing per-sentence [`NgramStats`].

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MetricError;

pub const CHRF_ORDER: usize = 6;
pub const CHRF_BETA: f64 = 2.0;
pub const BLEU_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LexicalKind {
    /// chrF: character n-grams, n = 1..6, beta = 2, whitespace ignored.
    CharNgramF,
    /// BLEU-4: geometric mean of token 1..4-gram precisions with brevity penalty.
    TokenNgramPrecision,
}

impl LexicalKind {
    pub fn name(self) -> &'static str {
        match self {
            LexicalKind::CharNgramF => "chrf",
            LexicalKind::TokenNgramPrecision => "bleu",
        }
    }

    fn order(self) -> usize {
        match self {
            LexicalKind::CharNgramF => CHRF_ORDER,
            LexicalKind::TokenNgramPrecision => BLEU_ORDER,
        }
    }
}

impl fmt::Display for LexicalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LexicalKind {
    type Err = MetricError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "chrf" | "char_ngram_f" => Ok(LexicalKind::CharNgramF),
            "bleu" | "bleu4" | "token_ngram_precision" => Ok(LexicalKind::TokenNgramPrecision),
            _ => Err(MetricError::UnknownMetric(s.to_string())),
        }
    }
}

/// Per-order n-gram match counts plus lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramStats {
    pub kind: LexicalKind,
    /// Clipped matches per order (index 0 is unigrams).
    pub matches: Vec<u64>,
    /// Hypothesis n-grams per order.
    pub hyp_totals: Vec<u64>,
    /// Reference n-grams per order.
    pub ref_totals: Vec<u64>,
    /// Hypothesis / reference length in the metric's units.
    pub hyp_len: u64,
    pub ref_len: u64,
}

fn ngram_counts<T: Eq + Hash + Clone>(units: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut map = HashMap::new();
    if units.len() >= n {
        for w in units.windows(n) {
            *map.entry(w).or_insert(0) += 1;
        }
    }
    map
}

fn collect<T: Eq + Hash + Clone>(kind: LexicalKind, hyp: &[T], reference: &[T]) -> NgramStats {
    let order = kind.order();
    let mut stats = NgramStats {
        kind,
        matches: vec![0; order],
        hyp_totals: vec![0; order],
        ref_totals: vec![0; order],
        hyp_len: hyp.len() as u64,
        ref_len: reference.len() as u64,
    };
    for n in 1..=order {
        let h = ngram_counts(hyp, n);
        let r = ngram_counts(reference, n);
        stats.matches[n - 1] = h
            .iter()
            .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
            .sum();
        stats.hyp_totals[n - 1] = h.values().sum();
        stats.ref_totals[n - 1] = r.values().sum();
    }
    stats
}

impl NgramStats {
    pub fn compute(kind: LexicalKind, hypothesis: &str, reference: &str) -> Result<Self, MetricError> {
        if reference.trim().is_empty() {
            return Err(MetricError::EmptyReference);
        }
        Ok(match kind {
            LexicalKind::CharNgramF => {
                let h: Vec<char> = hypothesis.chars().filter(|c| !c.is_whitespace()).collect();
                let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
                collect(kind, &h, &r)
            }
            LexicalKind::TokenNgramPrecision => {
                let h: Vec<&str> = hypothesis.split_whitespace().collect();
                let r: Vec<&str> = reference.split_whitespace().collect();
                collect(kind, &h, &r)
            }
        })
    }

    /// Adds another sentence's statistics (corpus-level aggregation).
    pub fn add(&mut self, other: &NgramStats) {
        assert_eq!(self.kind, other.kind, "cannot mix metric statistics");
        for n in 0..self.matches.len() {
            self.matches[n] += other.matches[n];
            self.hyp_totals[n] += other.hyp_totals[n];
            self.ref_totals[n] += other.ref_totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    pub fn score(&self) -> f64 {
        self.score_with(&self.matches.iter().map(|&m| m as f64).collect::<Vec<_>>())
    }

    /// Score with replacement match counts (used by bootstrap replicas).
    pub(crate) fn score_with(&self, matches: &[f64]) -> f64 {
        match self.kind {
            LexicalKind::CharNgramF => {
                let (mut p_sum, mut r_sum, mut orders) = (0.0, 0.0, 0usize);
                for n in 0..matches.len() {
                    if self.ref_totals[n] == 0 {
                        continue;
                    }
                    orders += 1;
                    if self.hyp_totals[n] > 0 {
                        p_sum += matches[n] / self.hyp_totals[n] as f64;
                    }
                    r_sum += matches[n] / self.ref_totals[n] as f64;
                }
                if orders == 0 {
                    return 0.0;
                }
                let p = p_sum / orders as f64;
                let r = r_sum / orders as f64;
                let b2 = CHRF_BETA * CHRF_BETA;
                if p + r == 0.0 {
                    0.0
                } else {
                    (1.0 + b2) * p * r / (b2 * p + r)
                }
            }
            LexicalKind::TokenNgramPrecision => {
                // Effective order: hypotheses shorter than 4 tokens use the
                // orders they actually have.
                let orders = (0..matches.len()).filter(|&n| self.hyp_totals[n] > 0).count();
                if orders == 0 {
                    return 0.0;
                }
                let mut log_sum = 0.0;
                for n in 0..orders {
                    if matches[n] <= 0.0 {
                        return 0.0;
                    }
                    log_sum += (matches[n] / self.hyp_totals[n] as f64).ln();
                }
                let c = self.hyp_len as f64;
                let r = self.ref_len as f64;
                let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
                bp * (log_sum / orders as f64).exp()
            }
        }
    }
}

/// Sentence-level score in `[0, 1]`.
pub fn lexical_score(hypothesis: &str, reference: &str, kind: LexicalKind) -> Result<f64, MetricError> {
    Ok(NgramStats::compute(kind, hypothesis, reference)?.score())
}

/// Corpus-level score from summed statistics over `(hypothesis, reference)` pairs.
pub fn corpus_score<'a>(
    pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    kind: LexicalKind,
) -> Result<f64, MetricError> {
    let mut total: Option<NgramStats> = None;
    for (h, r) in pairs {
        let s = NgramStats::compute(kind, h, r)?;
        match total.as_mut() {
            Some(t) => t.add(&s),
            None => total = Some(s),
        }
    }
    Ok(total.map(|t| t.score()).unwrap_or(0.0))
}
