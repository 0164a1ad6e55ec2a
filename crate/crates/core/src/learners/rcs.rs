use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::rucb::optimistic_challenger;
use super::stats::{argmax_random, ln_time};
use super::Strategy;
use crate::preference::WinCountMatrix;

/// Draws `theta_ij ~ Beta(w_ij + 1, w_ji + 1)`.
pub(crate) fn sample_posterior(counts: &WinCountMatrix, rng: &mut ChaCha8Rng, i: usize, j: usize) -> f64 {
    let a = counts.wins(i, j) + 1.0;
    let b = counts.wins(j, i) + 1.0;
    Beta::new(a, b).expect("Beta parameters are >= 1").sample(rng)
}

/// Relative Confidence Sampling.
///
/// Each round samples a preference matrix from the Beta posterior and plays a
/// simulated round robin. A system that beats everyone in the sample becomes
/// the champion; otherwise the most frequent past champion is used. The second
/// system is chosen optimistically as in RUCB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rcs {
    alpha: f64,
    champion_counts: Vec<u64>,
}

impl Rcs {
    pub fn new(k: usize, alpha: f64) -> Self {
        Rcs { alpha, champion_counts: vec![0; k] }
    }
}

impl Strategy for Rcs {
    fn select(&mut self, counts: &WinCountMatrix, rng: &mut ChaCha8Rng) -> (usize, usize) {
        let k = counts.k();
        let mut theta = vec![0.5; k * k];
        for i in 0..k {
            for j in (i + 1)..k {
                let v = sample_posterior(counts, rng, i, j);
                theta[i * k + j] = v;
                theta[j * k + i] = 1.0 - v;
            }
        }
        let sampled_winner = (0..k).find(|&c| (0..k).all(|j| theta[c * k + j] >= 0.5));
        let c = match sampled_winner {
            Some(c) => {
                self.champion_counts[c] += 1;
                c
            }
            None => argmax_random(
                rng,
                self.champion_counts.iter().enumerate().map(|(i, &n)| (i, n as f64)),
            )
            .expect("k >= 2"),
        };
        let d = optimistic_challenger(counts, rng, c, self.alpha, ln_time(counts));
        (c, d)
    }
}
