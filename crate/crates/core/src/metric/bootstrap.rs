use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::{MetricError, MetricScoreTable, NgramStats, ScoreRecord};

/// Attaches `l` bootstrap replicas to lexical scores.
///
/// Each replica redraws every order's match count as
/// `Binomial(hyp_total, matches / hyp_total)`, i.e. resamples which
/// hypothesis n-grams matched, and rescores. Entries are processed in the
/// given order from one seeded stream, so the output is reproducible.
pub fn bootstrap_samples(
    entries: &[(String, String, NgramStats)],
    l: usize,
    seed: u64,
) -> Result<MetricScoreTable, MetricError> {
    if l < 2 {
        return Err(MetricError::TooFewSamples(l));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(entries.len());
    for (system, example, stats) in entries {
        let samples = (0..l)
            .map(|_| {
                let draws: Vec<f64> = stats
                    .matches
                    .iter()
                    .zip(&stats.hyp_totals)
                    .map(|(&m, &h)| {
                        if h == 0 {
                            0.0
                        } else {
                            let p = (m as f64 / h as f64).clamp(0.0, 1.0);
                            Binomial::new(h, p).expect("valid binomial").sample(&mut rng) as f64
                        }
                    })
                    .collect();
                stats.score_with(&draws)
            })
            .collect();
        records.push(ScoreRecord {
            system_id: system.clone(),
            example_id: example.clone(),
            score: stats.score(),
            samples: Some(samples),
        });
    }
    MetricScoreTable::from_records(records)
}
