use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Strategy;
use crate::preference::{Verdict, WinCountMatrix};

/// Interleaved Filter.
///
/// A candidate plays every remaining system in round-robin order. A challenger
/// that the candidate beats with confidence is removed; a challenger that beats
/// the candidate with confidence becomes the new candidate, after every system
/// the old candidate was empirically beating has been pruned. Tallies restart
/// with each candidate. Terminates when no challengers remain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterleavedFilter {
    candidate: usize,
    remaining: Vec<usize>,
    /// Candidate wins against each system (fractional for ties).
    wins: Vec<f64>,
    trials: Vec<u64>,
    log_inv_delta: f64,
    cursor: usize,
    winner: Option<usize>,
}

impl InterleavedFilter {
    pub fn new(k: usize, horizon: f64, rng: &mut ChaCha8Rng) -> Self {
        let candidate = rng.random_range(0..k);
        let delta = 1.0 / (horizon * (k * k) as f64);
        InterleavedFilter {
            candidate,
            remaining: (0..k).filter(|&i| i != candidate).collect(),
            wins: vec![0.0; k],
            trials: vec![0; k],
            log_inv_delta: (1.0 / delta).ln(),
            cursor: 0,
            winner: None,
        }
    }

    pub fn candidate(&self) -> usize {
        self.candidate
    }

    /// Confidence radius after `n` duels against the candidate.
    pub fn radius(&self, n: u64) -> f64 {
        (4.0 * self.log_inv_delta / n as f64).sqrt()
    }

    fn p_hat(&self, b: usize) -> f64 {
        if self.trials[b] == 0 {
            0.5
        } else {
            self.wins[b] / self.trials[b] as f64
        }
    }
}

impl Strategy for InterleavedFilter {
    fn select(&mut self, _counts: &WinCountMatrix, _rng: &mut ChaCha8Rng) -> (usize, usize) {
        self.cursor %= self.remaining.len();
        let b = self.remaining[self.cursor];
        self.cursor += 1;
        (self.candidate, b)
    }

    fn observe(
        &mut self,
        _counts: &WinCountMatrix,
        _rng: &mut ChaCha8Rng,
        first: usize,
        second: usize,
        verdict: Verdict,
    ) {
        if self.winner.is_some() {
            return;
        }
        let (b, v) = if first == self.candidate {
            (second, verdict.value())
        } else if second == self.candidate {
            (first, 1.0 - verdict.value())
        } else {
            return;
        };
        if !self.remaining.contains(&b) {
            return;
        }
        self.wins[b] += v;
        self.trials[b] += 1;
        let p = self.p_hat(b);
        let c = self.radius(self.trials[b]);
        if p - c > 0.5 {
            self.remaining.retain(|&x| x != b);
        } else if p + c < 0.5 {
            let keep: Vec<usize> = self
                .remaining
                .iter()
                .copied()
                .filter(|&x| x != b && self.p_hat(x) <= 0.5)
                .collect();
            self.candidate = b;
            self.remaining = keep;
            self.wins.iter_mut().for_each(|w| *w = 0.0);
            self.trials.iter_mut().for_each(|n| *n = 0);
            self.cursor = 0;
        }
        if self.remaining.is_empty() {
            self.winner = Some(self.candidate);
        }
    }

    fn declared_winner(&self) -> Option<usize> {
        self.winner
    }

    fn active(&self, _k: usize) -> Vec<usize> {
        let mut v = self.remaining.clone();
        v.push(self.candidate);
        v.sort_unstable();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn deterministic_two_system_elimination() {
        // Oracle: smallest n with 1 - sqrt(4 ln(T K^2) / n) > 1/2.
        let horizon = 1e6;
        let log_term = (horizon * 4.0_f64).ln();
        let expected = (1..).find(|&n| 1.0 - (4.0 * log_term / n as f64).sqrt() > 0.5).unwrap();
        assert_eq!(expected, 244);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = InterleavedFilter::new(2, horizon, &mut rng);
        let counts = WinCountMatrix::new(2);
        let mut n = 0;
        while s.declared_winner().is_none() {
            let (a, b) = s.select(&counts, &mut rng);
            let v = if a == 0 { Verdict::Win } else { Verdict::Loss };
            s.observe(&counts, &mut rng, a, b, v);
            n += 1;
            assert!(n < 10_000);
        }
        assert_eq!(s.declared_winner(), Some(0));
        // Either the candidate eliminates system 1 or system 1 is replaced
        // after losing; both fire on the same duel.
        assert_eq!(n, expected);
    }
}
