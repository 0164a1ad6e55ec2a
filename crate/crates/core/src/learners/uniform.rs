use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Strategy;
use crate::preference::WinCountMatrix;

/// Uniform exploration: every unordered pair with probability `1 / C(k, 2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uniform {
    pairs: Vec<(usize, usize)>,
}

impl Uniform {
    pub fn new(k: usize) -> Self {
        let pairs = (0..k)
            .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
            .collect();
        Uniform { pairs }
    }

    /// Unordered candidate pairs.
    pub fn candidate_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

impl Strategy for Uniform {
    fn select(&mut self, _counts: &WinCountMatrix, rng: &mut ChaCha8Rng) -> (usize, usize) {
        self.pairs[rng.random_range(0..self.pairs.len())]
    }
}
