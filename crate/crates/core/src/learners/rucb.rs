use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::{argmax_random, ln_time, ucb};
use super::Strategy;
use crate::preference::WinCountMatrix;

/// Relative Upper Confidence Bound.
///
/// The first system is drawn from the systems whose optimistic estimates beat
/// everyone (`u_cj >= 1/2`), favouring the previous hypothesis; the second is
/// the opponent with the largest optimistic chance of beating it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rucb {
    alpha: f64,
    /// Hypothesized best system carried between rounds (at most one).
    best: Option<usize>,
}

impl Rucb {
    pub fn new(alpha: f64) -> Self {
        Rucb { alpha, best: None }
    }
}

/// Challenger of `c`: largest `u_jc` over `j != c`, random ties.
pub(crate) fn optimistic_challenger(
    counts: &WinCountMatrix,
    rng: &mut ChaCha8Rng,
    c: usize,
    alpha: f64,
    ln_t: f64,
) -> usize {
    let k = counts.k();
    argmax_random(
        rng,
        (0..k).filter(|&j| j != c).map(|j| (j, ucb(counts, j, c, alpha, ln_t))),
    )
    .expect("k >= 2")
}

impl Strategy for Rucb {
    fn select(&mut self, counts: &WinCountMatrix, rng: &mut ChaCha8Rng) -> (usize, usize) {
        let k = counts.k();
        let ln_t = ln_time(counts);
        let candidates: Vec<usize> = (0..k)
            .filter(|&c| (0..k).all(|j| ucb(counts, c, j, self.alpha, ln_t) >= 0.5))
            .collect();
        let c = if candidates.is_empty() {
            self.best = None;
            rng.random_range(0..k)
        } else {
            if let Some(b) = self.best {
                if !candidates.contains(&b) {
                    self.best = None;
                }
            }
            if candidates.len() == 1 {
                self.best = Some(candidates[0]);
                candidates[0]
            } else {
                match self.best {
                    // The carried hypothesis gets half the mass, the rest is
                    // spread uniformly.
                    Some(b) if rng.random_bool(0.5) => b,
                    Some(b) => {
                        let others: Vec<usize> =
                            candidates.iter().copied().filter(|&x| x != b).collect();
                        others[rng.random_range(0..others.len())]
                    }
                    None => candidates[rng.random_range(0..candidates.len())],
                }
            }
        };
        let d = optimistic_challenger(counts, rng, c, self.alpha, ln_t);
        (c, d)
    }
}
