use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EnvironmentError;
use crate::metric::{bootstrap_samples, LexicalKind, MetricScoreTable, NgramStats, ScoreRecord};

/// One line of a system-output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemOutputRecord {
    pub system_id: String,
    pub example_id: String,
    pub text: String,
}

/// One line of a reference file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceRecord {
    pub example_id: String,
    pub text: String,
}

/// Generated texts of every system on a shared example set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemOutputs {
    systems: Vec<String>,
    examples: Vec<String>,
    /// Row-major by system.
    texts: Vec<String>,
}

fn read_lines<T: serde::de::DeserializeOwned>(reader: impl BufRead) -> Result<Vec<(usize, T)>, EnvironmentError> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| EnvironmentError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        rows.push((i + 1, rec));
    }
    Ok(rows)
}

impl SystemOutputs {
    pub fn from_records(records: impl IntoIterator<Item = SystemOutputRecord>) -> Result<Self, EnvironmentError> {
        Self::build(records.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect())
    }

    fn build(rows: Vec<(usize, SystemOutputRecord)>) -> Result<Self, EnvironmentError> {
        let mut systems: Vec<String> = Vec::new();
        let mut examples: Vec<String> = Vec::new();
        let mut sys_index = HashMap::new();
        let mut ex_index = HashMap::new();
        for (_, r) in &rows {
            if !sys_index.contains_key(&r.system_id) {
                sys_index.insert(r.system_id.clone(), systems.len());
                systems.push(r.system_id.clone());
            }
            if !ex_index.contains_key(&r.example_id) {
                ex_index.insert(r.example_id.clone(), examples.len());
                examples.push(r.example_id.clone());
            }
        }
        if systems.len() < 2 {
            return Err(EnvironmentError::InvalidSpec(format!(
                "need at least 2 systems, found {}",
                systems.len()
            )));
        }
        let mut texts: Vec<Option<String>> = vec![None; systems.len() * examples.len()];
        for (line, r) in rows {
            let slot = sys_index[&r.system_id] * examples.len() + ex_index[&r.example_id];
            if texts[slot].is_some() {
                return Err(EnvironmentError::Parse {
                    line,
                    message: format!("duplicate output for system {:?} on example {:?}", r.system_id, r.example_id),
                });
            }
            texts[slot] = Some(r.text);
        }
        let mut missing = Vec::new();
        for (s, name) in systems.iter().enumerate() {
            for (e, ex) in examples.iter().enumerate() {
                if texts[s * examples.len() + e].is_none() {
                    missing.push(format!("{name}/{ex}"));
                }
            }
        }
        if !missing.is_empty() {
            return Err(EnvironmentError::InvalidSpec(format!(
                "missing outputs (system/example): {}",
                missing.join(", ")
            )));
        }
        Ok(SystemOutputs {
            systems,
            examples,
            texts: texts.into_iter().map(|t| t.expect("checked above")).collect(),
        })
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Self, EnvironmentError> {
        Self::build(read_lines(reader)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnvironmentError> {
        Self::read_jsonl(BufReader::new(File::open(path)?))
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn examples(&self) -> &[String] {
        &self.examples
    }

    pub fn text(&self, system: usize, example: usize) -> &str {
        &self.texts[system * self.examples.len() + example]
    }

    /// Checks that no system id appears twice in a caller-supplied roster.
    pub fn check_roster(roster: &[String]) -> Result<(), EnvironmentError> {
        let mut seen = BTreeSet::new();
        for s in roster {
            if !seen.insert(s) {
                return Err(EnvironmentError::DuplicateSystem(s.clone()));
            }
        }
        Ok(())
    }

    /// Scores every output against its reference with a built-in metric,
    /// optionally attaching `(L, seed)` bootstrap replicas.
    pub fn score(
        &self,
        references: &[ReferenceRecord],
        kind: LexicalKind,
        bootstrap: Option<(usize, u64)>,
    ) -> Result<MetricScoreTable, EnvironmentError> {
        let refs: HashMap<&str, &str> = references
            .iter()
            .map(|r| (r.example_id.as_str(), r.text.as_str()))
            .collect();
        let mut entries = Vec::with_capacity(self.texts.len());
        for (s, sys) in self.systems.iter().enumerate() {
            for (e, ex) in self.examples.iter().enumerate() {
                let reference = refs.get(ex.as_str()).ok_or_else(|| {
                    EnvironmentError::InvalidSpec(format!("no reference for example {ex:?}"))
                })?;
                let stats = NgramStats::compute(kind, self.text(s, e), reference)?;
                entries.push((sys.clone(), ex.clone(), stats));
            }
        }
        Ok(match bootstrap {
            Some((l, seed)) => bootstrap_samples(&entries, l, seed)?,
            None => MetricScoreTable::from_records(entries.into_iter().map(|(s, e, st)| ScoreRecord {
                system_id: s,
                example_id: e,
                score: st.score(),
                samples: None,
            }))?,
        })
    }

    pub fn read_references(reader: impl BufRead) -> Result<Vec<ReferenceRecord>, EnvironmentError> {
        Ok(read_lines(reader)?.into_iter().map(|(_, r)| r).collect())
    }
}
