use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Draw, EnvironmentError, PreferenceSource};
use crate::metric::{MetricScoreTable, ScoreRecord};
use crate::preference::{condorcet_winner, PreferenceMatrix, SystemId, Verdict};
use crate::probability::{sigmoid, ValidationPair};

/// A synthetic evaluation set with both human judgments and metric scores.
///
/// Every system `i` has a latent quality `q_ie = i ln(ratio) + spread z_ie` on
/// each example `e`. A human comparing `a` and `b` on `e` perceives
/// `q_ae - q_be` plus logistic noise and calls a tie inside `±tie_band`. The
/// metric observes `signal q_ie + metric_noise eps_ie`; its `samples` replicas
/// add `sample_noise` on top, standing in for a stochastic metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoredInstanceSpec {
    pub k: usize,
    pub examples: usize,
    pub ratio: f64,
    pub spread: f64,
    pub annotator_noise: f64,
    pub tie_band: f64,
    pub metric_signal: f64,
    pub metric_noise: f64,
    pub samples: usize,
    pub sample_noise: f64,
    pub seed: u64,
}

impl Default for ScoredInstanceSpec {
    fn default() -> Self {
        ScoredInstanceSpec {
            k: 10,
            examples: 2000,
            ratio: 1.3,
            spread: 1.0,
            annotator_noise: 0.05,
            tie_band: 0.36,
            metric_signal: 1.0,
            metric_noise: 0.32,
            samples: 20,
            sample_noise: 0.2,
            seed: 0,
        }
    }
}

impl ScoredInstanceSpec {
    pub fn build(&self) -> Result<ScoredInstance, EnvironmentError> {
        if self.k < 2 || self.examples == 0 {
            return Err(EnvironmentError::InvalidSpec("need k >= 2 systems and at least one example".into()));
        }
        if self.annotator_noise <= 0.0 || self.ratio <= 0.0 || self.tie_band < 0.0 || self.samples == 1 {
            return Err(EnvironmentError::InvalidSpec(
                "annotator noise and ratio must be positive, tie band non-negative, samples 0 or >= 2".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.examples;
        let step = self.ratio.ln();
        let quality: Vec<f64> = (0..self.k * n)
            .map(|x| {
                let z: f64 = rng.sample(StandardNormal);
                (x / n) as f64 * step + self.spread * z
            })
            .collect();
        let mut records = Vec::with_capacity(self.k * n);
        for i in 0..self.k {
            for e in 0..n {
                let eps: f64 = rng.sample(StandardNormal);
                let m = self.metric_signal * quality[i * n + e] + self.metric_noise * eps;
                let samples = (self.samples > 0).then(|| {
                    (0..self.samples)
                        .map(|_| m + self.sample_noise * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                });
                records.push(ScoreRecord {
                    system_id: format!("s{i}"),
                    example_id: format!("e{e}"),
                    score: m,
                    samples,
                });
            }
        }
        let table = MetricScoreTable::from_records(records)?;
        let mut inst = ScoredInstance {
            spec: self.clone(),
            quality,
            table,
            expected: PreferenceMatrix::from_btl(&vec![1.0; self.k])?,
        };
        let k = self.k;
        inst.expected = PreferenceMatrix::from_upper(k, |a, b| {
            (0..n)
                .map(|e| {
                    let (w, t, _) = inst.probabilities(a, b, e);
                    w + t / 2.0
                })
                .sum::<f64>()
                / n as f64
        })?;
        Ok(inst)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredInstance {
    spec: ScoredInstanceSpec,
    quality: Vec<f64>,
    table: MetricScoreTable,
    expected: PreferenceMatrix,
}

impl ScoredInstance {
    pub fn spec(&self) -> &ScoredInstanceSpec {
        &self.spec
    }

    /// Metric scores, indexed by system and example in roster order.
    pub fn table(&self) -> &MetricScoreTable {
        &self.table
    }

    fn q(&self, i: usize, e: usize) -> f64 {
        self.quality[i * self.spec.examples + e]
    }

    /// `(win, tie, loss)` probabilities of a human judging `a` against `b` on `e`.
    pub fn probabilities(&self, a: usize, b: usize, e: usize) -> (f64, f64, f64) {
        let d = self.q(a, e) - self.q(b, e);
        let s = self.spec.annotator_noise;
        let win = sigmoid((d - self.spec.tie_band) / s);
        let loss = sigmoid((-d - self.spec.tie_band) / s);
        (win, (1.0 - win - loss).max(0.0), loss)
    }

    /// The most likely human verdict.
    pub fn modal(&self, a: usize, b: usize, e: usize) -> Verdict {
        let (w, t, l) = self.probabilities(a, b, e);
        if w >= t && w >= l {
            Verdict::Win
        } else if l >= t {
            Verdict::Loss
        } else {
            Verdict::Tie
        }
    }

    pub fn truth(&self) -> Option<SystemId> {
        condorcet_winner(&self.expected)
    }

    /// Random `(pair, example)` validation items with drawn human verdicts.
    pub fn validation_pairs(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<ValidationPair> {
        let k = self.spec.k;
        (0..n)
            .map(|_| {
                let a = rng.random_range(0..k);
                let b = (a + rng.random_range(1..k)) % k;
                let d = self.draw(a, b, rng).expect("valid pair");
                ValidationPair {
                    first: self.table.entry(a, d.example).expect("complete table").mean,
                    second: self.table.entry(b, d.example).expect("complete table").mean,
                    human: d.human,
                }
            })
            .collect()
    }
}

impl PreferenceSource for ScoredInstance {
    fn k(&self) -> usize {
        self.spec.k
    }

    fn draw(&self, first: usize, second: usize, rng: &mut ChaCha8Rng) -> Result<Draw, EnvironmentError> {
        if first >= self.spec.k || second >= self.spec.k {
            return Err(EnvironmentError::UnknownSystem(format!("#{}", first.max(second))));
        }
        let e = rng.random_range(0..self.spec.examples);
        let u: f64 = rng.random_range(f64::EPSILON..1.0);
        let noise = self.spec.annotator_noise * (u / (1.0 - u)).ln();
        let d = self.q(first, e) - self.q(second, e) + noise;
        let v = if d > self.spec.tie_band {
            Verdict::Win
        } else if d < -self.spec.tie_band {
            Verdict::Loss
        } else {
            Verdict::Tie
        };
        Ok(Draw::new(first, second, e, v))
    }

    fn matrix(&self) -> PreferenceMatrix {
        self.expected.clone()
    }

    fn example_name(&self, e: usize) -> String {
        self.table.examples()[e].clone()
    }

    fn examples(&self) -> usize {
        self.spec.examples
    }
}
