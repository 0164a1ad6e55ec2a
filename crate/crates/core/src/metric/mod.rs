//! Automatic-metric scores and the pairwise predictions derived from them.
//!
//! Scores for every (system, example) come from a [`MetricScoreTable`],
//! either ingested from a line-delimited score file (any external metric) or
//! produced by the built-in [`lexical`] scorers. Entries may carry `L` sample
//! scores that stand in for a stochastic metric's predictive distribution.

mod bootstrap;
pub mod lexical;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preference::Verdict;
use crate::probability::FittedModel;

pub use bootstrap::bootstrap_samples;
pub use lexical::{corpus_score, lexical_score, LexicalKind, NgramStats};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("reference text is empty")]
    EmptyReference,
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("no score for system {system:?} on example {example:?}")]
    MissingEntry { system: String, example: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate score for system {system:?} on example {example:?}")]
    DuplicateEntry {
        line: usize,
        system: String,
        example: String,
    },
    #[error("line {line}: expected {expected} samples, found {found}")]
    InconsistentSamples {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("need at least 2 samples per entry, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One line of a score file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRecord {
    pub system_id: String,
    pub example_id: String,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub mean: f64,
    /// Empty when the table has no samples.
    pub samples: Vec<f64>,
}

/// Metric scores keyed by (system, example), stored densely.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricScoreTable {
    systems: Vec<String>,
    examples: Vec<String>,
    system_index: HashMap<String, usize>,
    example_index: HashMap<String, usize>,
    entries: Vec<Option<ScoreEntry>>,
    sample_count: Option<usize>,
}

impl MetricScoreTable {
    /// Builds a table from records; `line` numbers in errors are 1-based
    /// positions in the iterator.
    pub fn from_records(records: impl IntoIterator<Item = ScoreRecord>) -> Result<Self, MetricError> {
        let mut rows: Vec<(usize, ScoreRecord)> = Vec::new();
        for (i, r) in records.into_iter().enumerate() {
            rows.push((i + 1, r));
        }
        Self::build(rows)
    }

    fn build(rows: Vec<(usize, ScoreRecord)>) -> Result<Self, MetricError> {
        let mut t = MetricScoreTable::default();
        for (_, r) in &rows {
            if !t.system_index.contains_key(&r.system_id) {
                t.system_index.insert(r.system_id.clone(), t.systems.len());
                t.systems.push(r.system_id.clone());
            }
            if !t.example_index.contains_key(&r.example_id) {
                t.example_index.insert(r.example_id.clone(), t.examples.len());
                t.examples.push(r.example_id.clone());
            }
        }
        t.entries = vec![None; t.systems.len() * t.examples.len()];
        // Sample count fixed by the first record (0 = no samples).
        let mut expected: Option<usize> = None;
        for (line, r) in rows {
            if !r.score.is_finite() {
                return Err(MetricError::Parse { line, message: "score is not finite".into() });
            }
            let samples = r.samples.unwrap_or_default();
            if samples.iter().any(|s| !s.is_finite()) {
                return Err(MetricError::Parse { line, message: "sample is not finite".into() });
            }
            match expected {
                None => {
                    if samples.len() == 1 {
                        return Err(MetricError::TooFewSamples(1));
                    }
                    expected = Some(samples.len());
                }
                Some(n) if n != samples.len() => {
                    return Err(MetricError::InconsistentSamples { line, expected: n, found: samples.len() });
                }
                Some(_) => {}
            }
            let idx = t.slot(t.system_index[&r.system_id], t.example_index[&r.example_id]);
            if t.entries[idx].is_some() {
                return Err(MetricError::DuplicateEntry {
                    line,
                    system: r.system_id,
                    example: r.example_id,
                });
            }
            t.entries[idx] = Some(ScoreEntry { mean: r.score, samples });
        }
        t.sample_count = expected.filter(|&n| n > 0);
        Ok(t)
    }

    /// Parses a line-delimited score file; blank lines are skipped.
    pub fn read_jsonl(reader: impl BufRead) -> Result<Self, MetricError> {
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ScoreRecord = serde_json::from_str(&line).map_err(|e| MetricError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            rows.push((i + 1, rec));
        }
        Self::build(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricError> {
        Self::read_jsonl(BufReader::new(File::open(path)?))
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<(), MetricError> {
        for rec in self.records() {
            serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Records in system-major, first-seen order.
    pub fn records(&self) -> impl Iterator<Item = ScoreRecord> + '_ {
        (0..self.systems.len()).flat_map(move |s| {
            (0..self.examples.len()).filter_map(move |e| {
                self.entries[self.slot(s, e)].as_ref().map(|entry| ScoreRecord {
                    system_id: self.systems[s].clone(),
                    example_id: self.examples[e].clone(),
                    score: entry.mean,
                    samples: (!entry.samples.is_empty()).then(|| entry.samples.clone()),
                })
            })
        })
    }

    fn slot(&self, system: usize, example: usize) -> usize {
        system * self.examples.len() + example
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    /// The rows of `roster`, in that order.
    pub fn restrict(&self, roster: &[String]) -> Result<MetricScoreTable, MetricError> {
        let mut records = Vec::new();
        for name in roster {
            let s = self.system_index(name).ok_or_else(|| MetricError::MissingEntry {
                system: name.clone(),
                example: self.examples.first().cloned().unwrap_or_default(),
            })?;
            records.extend(self.records().filter(|r| r.system_id == self.systems[s]));
        }
        MetricScoreTable::from_records(records)
    }

    pub fn examples(&self) -> &[String] {
        &self.examples
    }

    pub fn system_index(&self, name: &str) -> Option<usize> {
        self.system_index.get(name).copied()
    }

    pub fn example_index(&self, name: &str) -> Option<usize> {
        self.example_index.get(name).copied()
    }

    /// Samples per entry, if the table carries samples.
    pub fn sample_count(&self) -> Option<usize> {
        self.sample_count
    }

    pub fn entry(&self, system: usize, example: usize) -> Result<&ScoreEntry, MetricError> {
        self.entries
            .get(self.slot(system, example))
            .and_then(|e| e.as_ref())
            .filter(|_| system < self.systems.len() && example < self.examples.len())
            .ok_or_else(|| MetricError::MissingEntry {
                system: self.systems.get(system).cloned().unwrap_or_else(|| format!("#{system}")),
                example: self.examples.get(example).cloned().unwrap_or_else(|| format!("#{example}")),
            })
    }

    pub fn entry_by_name(&self, system: &str, example: &str) -> Result<&ScoreEntry, MetricError> {
        let missing = || MetricError::MissingEntry {
            system: system.to_string(),
            example: example.to_string(),
        };
        let s = self.system_index(system).ok_or_else(missing)?;
        let e = self.example_index(example).ok_or_else(missing)?;
        self.entry(s, e)
    }

    /// Every (system, example) combination has a score.
    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(|e| e.is_some())
    }
}

/// The metric's view of one comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwisePrediction {
    /// Mean preference probability for the first system.
    pub mean: f64,
    /// Per-sample probabilities; empty without samples.
    pub samples: Vec<f64>,
    pub predicted: Verdict,
}

impl PairwisePrediction {
    pub fn from_samples(samples: Vec<f64>, model: &FittedModel) -> Self {
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        PairwisePrediction { mean, samples, predicted: model.predict(mean) }
    }

    pub fn swapped(&self) -> Self {
        PairwisePrediction {
            mean: 1.0 - self.mean,
            samples: self.samples.iter().map(|p| 1.0 - p).collect(),
            predicted: self.predicted.flip(),
        }
    }
}

/// Metric prediction for `a` versus `b` on one example.
pub fn predict_pair(
    table: &MetricScoreTable,
    model: &FittedModel,
    a: usize,
    b: usize,
    example: usize,
) -> Result<PairwisePrediction, MetricError> {
    let ea = table.entry(a, example)?;
    let eb = table.entry(b, example)?;
    if ea.samples.is_empty() {
        let mean = model.probability(ea.mean, eb.mean);
        return Ok(PairwisePrediction { mean, samples: Vec::new(), predicted: model.predict(mean) });
    }
    let samples: Vec<f64> = ea
        .samples
        .iter()
        .zip(&eb.samples)
        .map(|(&x, &y)| model.probability(x, y))
        .collect();
    Ok(PairwisePrediction::from_samples(samples, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::{ScorePreprocessor, ThresholdPair};

    fn rec(s: &str, e: &str, score: f64, samples: Option<Vec<f64>>) -> ScoreRecord {
        ScoreRecord { system_id: s.into(), example_id: e.into(), score, samples }
    }

    fn linear() -> FittedModel {
        FittedModel::new(ScorePreprocessor::Linear { delta: 0.5 }, ThresholdPair::default())
    }

    #[test]
    fn equal_means_predict_tie() {
        let t = MetricScoreTable::from_records([rec("a", "x", 0.3, None), rec("b", "x", 0.3, None)]).unwrap();
        let p = predict_pair(&t, &linear(), 0, 1, 0).unwrap();
        assert_eq!(p.mean, 0.5);
        assert_eq!(p.predicted, Verdict::Tie);
        assert!(p.samples.is_empty());
    }

    #[test]
    fn sample_mean() {
        let m = linear();
        let p = PairwisePrediction::from_samples(vec![0.1, 0.9], &m);
        assert_eq!(p.mean, 0.5);
        let t = MetricScoreTable::from_records([
            rec("a", "x", 0.5, Some(vec![0.2, 0.8])),
            rec("b", "x", 0.5, Some(vec![0.6, 0.4])),
        ])
        .unwrap();
        let p = predict_pair(&t, &m, 0, 1, 0).unwrap();
        assert_eq!(p.samples.len(), 2);
        let q = predict_pair(&t, &m, 1, 0, 0).unwrap();
        assert!((p.mean + q.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_entry_names_key() {
        let t = MetricScoreTable::from_records([rec("a", "x", 0.3, None), rec("b", "y", 0.3, None)]).unwrap();
        let err = predict_pair(&t, &linear(), 0, 1, 0).unwrap_err();
        assert!(err.to_string().contains("\"b\"") && err.to_string().contains("\"x\""));
    }

    #[test]
    fn score_file_validation() {
        let ok = "{\"system_id\":\"a\",\"example_id\":\"1\",\"score\":0.5,\"samples\":[0.4,0.6]}\n\n{\"system_id\":\"b\",\"example_id\":\"1\",\"score\":0.2,\"samples\":[0.1,0.3]}\n";
        let t = MetricScoreTable::read_jsonl(ok.as_bytes()).unwrap();
        assert_eq!(t.sample_count(), Some(2));
        let mut out = Vec::new();
        t.write_jsonl(&mut out).unwrap();
        assert_eq!(MetricScoreTable::read_jsonl(out.as_slice()).unwrap(), t);

        let bad = "{\"system_id\":\"a\",\"example_id\":\"1\",\"score\":0.5,\"samples\":[0.4,0.6]}\n{\"system_id\":\"b\",\"example_id\":\"1\",\"score\":0.2}\n";
        assert!(matches!(
            MetricScoreTable::read_jsonl(bad.as_bytes()),
            Err(MetricError::InconsistentSamples { line: 2, expected: 2, found: 0 })
        ));
        let junk = "{\"system_id\":\"a\",\"example_id\":\"1\",\"score\":0.5}\n{\"system\":1}\n";
        assert!(matches!(MetricScoreTable::read_jsonl(junk.as_bytes()), Err(MetricError::Parse { line: 2, .. })));
        let dup = "{\"system_id\":\"a\",\"example_id\":\"1\",\"score\":0.5}\n{\"system_id\":\"a\",\"example_id\":\"1\",\"score\":0.5}\n";
        assert!(matches!(MetricScoreTable::read_jsonl(dup.as_bytes()), Err(MetricError::DuplicateEntry { line: 2, .. })));
        let one = "{\"system_id\":\"a\",\"example_id\":\"1\",\"score\":0.5,\"samples\":[0.4]}\n";
        assert!(matches!(MetricScoreTable::read_jsonl(one.as_bytes()), Err(MetricError::TooFewSamples(1))));
    }
}
