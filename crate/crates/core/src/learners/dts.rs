use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::rcs::sample_posterior;
use super::stats::{argmax_random, lcb, ln_time, ucb};
use super::Strategy;
use crate::preference::WinCountMatrix;

/// Double Thompson Sampling, with the DTS++ tie-breaking refinement.
///
/// Candidates for the first system are the optimistic Copeland leaders; among
/// them the one with the best Copeland score in a posterior sample wins. The
/// second system maximizes an independent posterior sample of beating the
/// first, restricted to opponents not already confidently beaten.
///
/// DTS++ resolves ties among first-system candidates by the sampled total
/// preference `sum_j theta_ij` instead of uniformly at random.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dts {
    alpha: f64,
    plus_plus: bool,
}

impl Dts {
    pub fn new(alpha: f64, plus_plus: bool) -> Self {
        Dts { alpha, plus_plus }
    }
}

impl Strategy for Dts {
    fn select(&mut self, counts: &WinCountMatrix, rng: &mut ChaCha8Rng) -> (usize, usize) {
        let k = counts.k();
        let ln_t = ln_time(counts);
        let upper_copeland: Vec<usize> = (0..k)
            .map(|i| {
                (0..k)
                    .filter(|&j| j != i && ucb(counts, i, j, self.alpha, ln_t) > 0.5)
                    .count()
            })
            .collect();
        let best = *upper_copeland.iter().max().expect("k >= 2");
        let candidates: Vec<usize> = (0..k).filter(|&i| upper_copeland[i] == best).collect();

        // One posterior sample shared by all candidate rows.
        let mut theta = vec![f64::NAN; k * k];
        for &i in &candidates {
            for j in 0..k {
                if j == i {
                    theta[i * k + j] = 0.5;
                } else if theta[i * k + j].is_nan() {
                    let v = sample_posterior(counts, rng, i, j);
                    theta[i * k + j] = v;
                    theta[j * k + i] = 1.0 - v;
                }
            }
        }
        let sampled_copeland = |i: usize| (0..k).filter(|&j| j != i && theta[i * k + j] > 0.5).count();
        let first = if self.plus_plus {
            let top = candidates.iter().map(|&i| sampled_copeland(i)).max().unwrap_or(0);
            argmax_random(
                rng,
                candidates
                    .iter()
                    .copied()
                    .filter(|&i| sampled_copeland(i) == top)
                    .map(|i| (i, (0..k).map(|j| theta[i * k + j]).sum::<f64>())),
            )
        } else {
            argmax_random(rng, candidates.iter().map(|&i| (i, sampled_copeland(i) as f64)))
        }
        .expect("candidate set is non-empty");

        let challengers: Vec<(usize, f64)> = (0..k)
            .filter(|&i| i != first)
            .map(|i| (i, lcb(counts, i, first, self.alpha, ln_t)))
            .collect();
        let plausible: Vec<usize> = challengers
            .iter()
            .filter(|(_, l)| *l <= 0.5)
            .map(|(i, _)| *i)
            .collect();
        let pool: Vec<usize> = if plausible.is_empty() {
            challengers.iter().map(|(i, _)| *i).collect()
        } else {
            plausible
        };
        let scored: Vec<(usize, f64)> = pool
            .into_iter()
            .map(|i| (i, sample_posterior(counts, rng, i, first)))
            .collect();
        let second = argmax_random(rng, scored).expect("k >= 2");
        (first, second)
    }
}
