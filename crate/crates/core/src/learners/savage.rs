use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::hoeffding_radius;
use super::Strategy;
use crate::preference::{Verdict, WinCountMatrix};

/// Sensitivity Analysis of VAriables for Generic Exploration, Copeland flavour.
///
/// Pairs are sampled uniformly from the active set. A pair leaves the set once
/// its direction is known with confidence, or once both of its systems are
/// provably not Copeland winners (their optimistic Copeland count is below
/// someone's pessimistic count). The learner terminates when a single
/// undominated system is left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Savage {
    delta: f64,
    active_pairs: Vec<(usize, usize)>,
    winner: Option<usize>,
}

impl Savage {
    pub fn new(k: usize, delta: f64) -> Self {
        Savage {
            delta,
            active_pairs: (0..k)
                .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
                .collect(),
            winner: None,
        }
    }

    pub fn active_pairs(&self) -> &[(usize, usize)] {
        &self.active_pairs
    }

    fn prune(&mut self, counts: &WinCountMatrix) {
        let k = counts.k();
        let mut lower = vec![0usize; k];
        let mut upper = vec![0usize; k];
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                let (lo, hi) = bounds(counts, self.delta, i, j);
                if lo > 0.5 {
                    lower[i] += 1;
                }
                if hi > 0.5 {
                    upper[i] += 1;
                }
            }
        }
        let best_lower = *lower.iter().max().unwrap_or(&0);
        let dominated: Vec<bool> = upper.iter().map(|&u| u < best_lower).collect();
        let delta = self.delta;
        self.active_pairs.retain(|&(i, j)| {
            let (lo, hi) = bounds(counts, delta, i, j);
            let resolved = lo > 0.5 || hi < 0.5;
            !(resolved || (dominated[i] && dominated[j]))
        });
        let undominated: Vec<usize> = (0..k).filter(|&i| !dominated[i]).collect();
        if undominated.len() == 1 {
            self.winner = Some(undominated[0]);
        } else if self.active_pairs.is_empty() {
            let mut best = 0;
            for i in 1..k {
                if lower[i] > lower[best] {
                    best = i;
                }
            }
            self.winner = Some(best);
        }
    }
}

fn bounds(counts: &WinCountMatrix, delta: f64, i: usize, j: usize) -> (f64, f64) {
    let n = counts.trials(i, j);
    if n == 0 {
        return (0.0, 1.0);
    }
    let r = hoeffding_radius(n, counts.k(), delta);
    let p = counts.p_hat(i, j);
    (p - r, p + r)
}

impl Strategy for Savage {
    fn select(&mut self, _counts: &WinCountMatrix, rng: &mut ChaCha8Rng) -> (usize, usize) {
        self.active_pairs[rng.random_range(0..self.active_pairs.len())]
    }

    fn observe(
        &mut self,
        counts: &WinCountMatrix,
        _rng: &mut ChaCha8Rng,
        _first: usize,
        _second: usize,
        _verdict: Verdict,
    ) {
        if self.winner.is_none() {
            self.prune(counts);
        }
    }

    fn declared_winner(&self) -> Option<usize> {
        self.winner
    }

    fn active(&self, k: usize) -> Vec<usize> {
        if let Some(w) = self.winner {
            return vec![w];
        }
        let mut seen = vec![false; k];
        for &(i, j) in &self.active_pairs {
            seen[i] = true;
            seen[j] = true;
        }
        (0..k).filter(|&i| seen[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preference::SystemId;
    use rand::SeedableRng;

    #[test]
    fn eliminated_pair_never_returned() {
        let mut s = Savage::new(3, 0.05);
        let mut counts = WinCountMatrix::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..400 {
            counts.record(SystemId(0), SystemId(1), Verdict::Win).unwrap();
        }
        s.observe(&counts, &mut rng, 0, 1, Verdict::Win);
        assert!(!s.active_pairs().contains(&(0, 1)));
        for _ in 0..1000 {
            assert_ne!(s.select(&counts, &mut rng), (0, 1));
        }
    }
}
