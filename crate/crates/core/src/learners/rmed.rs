use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::kl_bernoulli;
use super::Strategy;
use crate::preference::WinCountMatrix;

/// Relative Minimum Empirical Divergence (RMED1).
///
/// After one duel on every pair, systems are visited in loops. The empirical
/// divergence `I_i = sum_{j: p̂_ij <= 1/2} n_ij * KL(p̂_ij, 1/2)` measures how
/// implausible it is that `i` is the Condorcet winner; systems within
/// `ln t + f(k)` of the minimum are revisited in the next loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rmed {
    exploration: f64,
    init_queue: Vec<(usize, usize)>,
    current: Vec<usize>,
    cursor: usize,
    remaining: Vec<bool>,
    next: Vec<usize>,
    in_next: Vec<bool>,
    pending_refresh: bool,
}

impl Rmed {
    pub fn new(k: usize, f_scale: f64, f_exponent: f64) -> Self {
        let mut init_queue: Vec<(usize, usize)> = (0..k)
            .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
            .collect();
        // Popped from the back.
        init_queue.reverse();
        Rmed {
            exploration: f_scale * (k as f64).powf(f_exponent),
            init_queue,
            current: (0..k).collect(),
            cursor: 0,
            remaining: vec![true; k],
            next: Vec::new(),
            in_next: vec![false; k],
            pending_refresh: false,
        }
    }

    /// The exploration term `f(k)`.
    pub fn exploration(&self) -> f64 {
        self.exploration
    }

    fn divergences(counts: &WinCountMatrix) -> Vec<f64> {
        let k = counts.k();
        (0..k)
            .map(|i| {
                (0..k)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let p = counts.p_hat(i, j);
                        if p <= 0.5 {
                            counts.trials(i, j) as f64 * kl_bernoulli(p, 0.5)
                        } else {
                            0.0
                        }
                    })
                    .sum()
            })
            .collect()
    }

    /// Adds every plausible winner not left in the current loop to the next one.
    fn refresh_next(&mut self, counts: &WinCountMatrix) {
        let div = Self::divergences(counts);
        let best = div.iter().copied().fold(f64::INFINITY, f64::min);
        let slack = ((counts.total() + 1) as f64).ln() + self.exploration;
        for (j, &d) in div.iter().enumerate() {
            if d - best <= slack && !self.remaining[j] && !self.in_next[j] {
                self.in_next[j] = true;
                self.next.push(j);
            }
        }
    }

    fn second(counts: &WinCountMatrix, l: usize) -> usize {
        let k = counts.k();
        let div = Self::divergences(counts);
        let mut best_i = 0;
        for i in 1..k {
            if div[i] < div[best_i] {
                best_i = i;
            }
        }
        let beaten_by = |j: usize| j != l && counts.p_hat(l, j) <= 0.5;
        if best_i != l && beaten_by(best_i) {
            return best_i;
        }
        // Opponent that beats l the most; when nobody beats l this is its
        // closest challenger.
        let mut m = usize::MAX;
        for j in (0..k).filter(|&j| j != l) {
            if m == usize::MAX || counts.p_hat(l, j) < counts.p_hat(l, m) {
                m = j;
            }
        }
        m
    }
}

impl Strategy for Rmed {
    fn select(&mut self, counts: &WinCountMatrix, _rng: &mut ChaCha8Rng) -> (usize, usize) {
        if let Some(pair) = self.init_queue.pop() {
            return pair;
        }
        if self.pending_refresh {
            self.refresh_next(counts);
            self.pending_refresh = false;
        }
        if self.cursor >= self.current.len() {
            if self.next.is_empty() {
                self.refresh_next(counts);
            }
            self.current = std::mem::take(&mut self.next);
            self.current.sort_unstable();
            self.in_next.iter_mut().for_each(|b| *b = false);
            self.remaining.iter_mut().for_each(|b| *b = false);
            for &i in &self.current {
                self.remaining[i] = true;
            }
            self.cursor = 0;
        }
        let l = self.current[self.cursor];
        self.cursor += 1;
        self.remaining[l] = false;
        self.pending_refresh = true;
        (l, Self::second(counts, l))
    }
}
