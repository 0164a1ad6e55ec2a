use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Draw, EnvironmentError, PreferenceSource};
use crate::preference::{condorcet_winner, ComparisonOutcome, PreferenceMatrix, Source, SystemId, Verdict};

/// One line of a judgment file; `outcome` is 1 when `system_a` won.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgmentRecord {
    pub example_id: String,
    pub system_a: String,
    pub system_b: String,
    pub outcome: f64,
}

/// Recorded pairwise human judgments, stored canonically with `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgmentDataset {
    roster: Vec<String>,
    system_index: HashMap<String, usize>,
    examples: Vec<String>,
    /// Per canonical pair `(a, b)`, `a < b`: (example, verdict for `a`).
    pairs: Vec<Vec<(u32, Verdict)>>,
}

fn pair_slot(k: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b);
    a * k + b
}

impl JudgmentDataset {
    /// Builds a dataset; the roster is the order in which systems first
    /// appear. Line numbers in errors are 1-based record positions.
    pub fn from_records(records: impl IntoIterator<Item = JudgmentRecord>) -> Result<Self, EnvironmentError> {
        Self::build(records.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect())
    }

    fn build(rows: Vec<(usize, JudgmentRecord)>) -> Result<Self, EnvironmentError> {
        let mut roster = Vec::new();
        let mut system_index = HashMap::new();
        let mut examples = Vec::new();
        let mut example_index: HashMap<String, u32> = HashMap::new();
        for (_, r) in &rows {
            for s in [&r.system_a, &r.system_b] {
                if !system_index.contains_key(s) {
                    system_index.insert(s.clone(), roster.len());
                    roster.push(s.clone());
                }
            }
        }
        let k = roster.len();
        if k < 2 {
            return Err(EnvironmentError::InvalidSpec(format!("need at least 2 systems, found {k}")));
        }
        let mut pairs = vec![Vec::new(); k * k];
        for (line, r) in rows {
            let verdict = Verdict::from_value(r.outcome).map_err(|_| EnvironmentError::Parse {
                line,
                message: format!("outcome {} is not one of 0, 0.5, 1", r.outcome),
            })?;
            let a = system_index[&r.system_a];
            let b = system_index[&r.system_b];
            if a == b {
                return Err(EnvironmentError::Parse {
                    line,
                    message: format!("system {:?} compared with itself", r.system_a),
                });
            }
            let e = *example_index.entry(r.example_id.clone()).or_insert_with(|| {
                examples.push(r.example_id.clone());
                (examples.len() - 1) as u32
            });
            if a < b {
                pairs[pair_slot(k, a, b)].push((e, verdict));
            } else {
                pairs[pair_slot(k, b, a)].push((e, verdict.flip()));
            }
        }
        Ok(JudgmentDataset { roster, system_index, examples, pairs })
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Self, EnvironmentError> {
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: JudgmentRecord = serde_json::from_str(&line).map_err(|e| EnvironmentError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            rows.push((i + 1, rec));
        }
        Self::build(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnvironmentError> {
        Self::read_jsonl(BufReader::new(File::open(path)?))
    }

    /// Pairwise records from ranked lists (best first): every pair in a list
    /// yields one judgment.
    pub fn from_ranked_lists<'a>(
        lists: impl IntoIterator<Item = (&'a str, &'a [&'a str])>,
    ) -> Result<Self, EnvironmentError> {
        let mut records = Vec::new();
        for (example, ranking) in lists {
            for (x, a) in ranking.iter().enumerate() {
                for b in &ranking[x + 1..] {
                    records.push(JudgmentRecord {
                        example_id: example.to_string(),
                        system_a: a.to_string(),
                        system_b: b.to_string(),
                        outcome: 1.0,
                    });
                }
            }
        }
        Self::from_records(records)
    }

    /// Pairwise records from per-example numeric scores; equal scores tie.
    pub fn from_numeric_scores<'a>(
        scores: impl IntoIterator<Item = (&'a str, &'a [(&'a str, f64)])>,
    ) -> Result<Self, EnvironmentError> {
        let mut records = Vec::new();
        for (example, rated) in scores {
            for (x, (a, sa)) in rated.iter().enumerate() {
                for (b, sb) in &rated[x + 1..] {
                    let outcome = if sa > sb {
                        1.0
                    } else if sa < sb {
                        0.0
                    } else {
                        0.5
                    };
                    records.push(JudgmentRecord {
                        example_id: example.to_string(),
                        system_a: a.to_string(),
                        system_b: b.to_string(),
                        outcome,
                    });
                }
            }
        }
        Self::from_records(records)
    }

    pub fn roster(&self) -> &[String] {
        &self.roster
    }

    pub fn system_id(&self, name: &str) -> Option<SystemId> {
        self.system_index.get(name).copied().map(SystemId)
    }

    pub fn len(&self) -> usize {
        self.pairs.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every recorded judgment as `(a, b, example, verdict for a)` with `a < b`.
    pub fn judgments(&self) -> impl Iterator<Item = (usize, usize, usize, Verdict)> + '_ {
        let k = self.roster.len();
        (0..k).flat_map(move |a| {
            ((a + 1)..k).flat_map(move |b| {
                self.pairs[pair_slot(k, a, b)].iter().map(move |&(e, v)| (a, b, e as usize, v))
            })
        })
    }

    /// Judgments recorded for the unordered pair.
    pub fn pair_count(&self, a: usize, b: usize) -> usize {
        let k = self.roster.len();
        if a == b || a >= k || b >= k {
            return 0;
        }
        self.pairs[pair_slot(k, a.min(b), a.max(b))].len()
    }

    /// Unordered pairs without any recorded judgment.
    pub fn uncovered_pairs(&self) -> Vec<(String, String)> {
        let k = self.roster.len();
        let mut out = Vec::new();
        for a in 0..k {
            for b in (a + 1)..k {
                if self.pairs[pair_slot(k, a, b)].is_empty() {
                    out.push((self.roster[a].clone(), self.roster[b].clone()));
                }
            }
        }
        out
    }

    /// Preflight check used before simulations.
    pub fn check_coverage(&self) -> Result<(), EnvironmentError> {
        let missing = self.uncovered_pairs();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(EnvironmentError::Coverage(missing))
        }
    }

    /// `(system_a, system_b, judgments)` for every unordered pair.
    pub fn coverage_summary(&self) -> Vec<(String, String, usize)> {
        let k = self.roster.len();
        let mut out = Vec::new();
        for a in 0..k {
            for b in (a + 1)..k {
                out.push((self.roster[a].clone(), self.roster[b].clone(), self.pairs[pair_slot(k, a, b)].len()));
            }
        }
        out
    }

    /// Mean recorded outcome per pair (ties count half); 1/2 where uncovered.
    pub fn win_fractions(&self) -> PreferenceMatrix {
        let k = self.roster.len();
        PreferenceMatrix::from_upper(k, |a, b| {
            let recs = &self.pairs[pair_slot(k, a, b)];
            if recs.is_empty() {
                0.5
            } else {
                recs.iter().map(|r| r.1.value()).sum::<f64>() / recs.len() as f64
            }
        })
        .expect("fractions are valid probabilities")
    }

    /// Ground-truth top system: the Condorcet winner of the full-data win fractions.
    pub fn truth(&self) -> Result<SystemId, EnvironmentError> {
        condorcet_winner(&self.win_fractions()).ok_or(EnvironmentError::NoCondorcetWinner)
    }

    /// Uniformly samples a recorded judgment for the pair, oriented as asked.
    pub fn sample_judgment(
        &self,
        first: SystemId,
        second: SystemId,
        rng: &mut ChaCha8Rng,
    ) -> Result<ComparisonOutcome, EnvironmentError> {
        let d = self.draw(first.0, second.0, rng)?;
        Ok(ComparisonOutcome::new(first, second, d.human, Source::Human, self.example_name(d.example)))
    }
}

impl PreferenceSource for JudgmentDataset {
    fn k(&self) -> usize {
        self.roster.len()
    }

    fn draw(&self, first: usize, second: usize, rng: &mut ChaCha8Rng) -> Result<Draw, EnvironmentError> {
        let k = self.roster.len();
        for s in [first, second] {
            if s >= k {
                return Err(EnvironmentError::UnknownSystem(format!("#{s}")));
            }
        }
        if first == second {
            return Err(EnvironmentError::InvalidSpec("pair of identical systems".into()));
        }
        let (a, b) = (first.min(second), first.max(second));
        let recs = &self.pairs[pair_slot(k, a, b)];
        if recs.is_empty() {
            return Err(EnvironmentError::Coverage(vec![(self.roster[a].clone(), self.roster[b].clone())]));
        }
        let (e, v) = recs[rng.random_range(0..recs.len())];
        let v = if first == a { v } else { v.flip() };
        Ok(Draw::new(first, second, e as usize, v))
    }

    fn matrix(&self) -> PreferenceMatrix {
        self.win_fractions()
    }

    fn example_name(&self, e: usize) -> String {
        self.examples[e].clone()
    }

    fn examples(&self) -> usize {
        self.examples.len()
    }
}
