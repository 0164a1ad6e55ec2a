use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::argmin_random;
use super::Strategy;
use crate::preference::{Verdict, WinCountMatrix};

/// Beat-the-Mean.
///
/// Each round the least-compared active system plays a uniformly drawn active
/// opponent; its record against "the mean" opponent is the share of those
/// duels it won. The worst system is removed once its optimistic record falls
/// below the best pessimistic one, together with every duel played against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatTheMean {
    k: usize,
    active: Vec<usize>,
    /// `wins[b * k + o]`: wins of `b` when it was the selected system against `o`.
    wins: Vec<f64>,
    trials: Vec<u64>,
    gamma: f64,
    log_inv_delta: f64,
    winner: Option<usize>,
}

impl BeatTheMean {
    pub fn new(k: usize, horizon: f64, gamma: f64) -> Self {
        let delta = 1.0 / (2.0 * horizon * k as f64);
        BeatTheMean {
            k,
            active: (0..k).collect(),
            wins: vec![0.0; k * k],
            trials: vec![0; k * k],
            gamma,
            log_inv_delta: (1.0 / delta).ln(),
            winner: None,
        }
    }

    fn totals(&self, b: usize) -> (f64, u64) {
        self.active.iter().fold((0.0, 0), |(w, n), &o| {
            (w + self.wins[b * self.k + o], n + self.trials[b * self.k + o])
        })
    }

    fn radius(&self, n: u64) -> f64 {
        3.0 * self.gamma * self.gamma * (self.log_inv_delta / n as f64).sqrt()
    }

    fn try_eliminate(&mut self) {
        let stats: Vec<(usize, f64, u64)> = self
            .active
            .iter()
            .map(|&b| {
                let (w, n) = self.totals(b);
                (b, w, n)
            })
            .collect();
        let n_min = stats.iter().map(|s| s.2).min().unwrap_or(0);
        if n_min == 0 {
            return;
        }
        let c = self.radius(n_min);
        let p = |s: &(usize, f64, u64)| s.1 / s.2 as f64;
        let worst = stats
            .iter()
            .min_by(|a, b| p(a).total_cmp(&p(b)).then(b.0.cmp(&a.0)))
            .expect("active set is non-empty");
        let best = stats.iter().map(p).fold(f64::NEG_INFINITY, f64::max);
        if p(worst) + c <= best - c {
            let gone = worst.0;
            self.active.retain(|&b| b != gone);
        }
        if self.active.len() == 1 {
            self.winner = Some(self.active[0]);
        }
    }
}

impl Strategy for BeatTheMean {
    fn select(&mut self, _counts: &WinCountMatrix, rng: &mut ChaCha8Rng) -> (usize, usize) {
        let b = argmin_random(
            rng,
            self.active.iter().map(|&b| (b, self.totals(b).1 as f64)),
        )
        .expect("active set is non-empty");
        let others: Vec<usize> = self.active.iter().copied().filter(|&o| o != b).collect();
        (b, others[rng.random_range(0..others.len())])
    }

    fn observe(
        &mut self,
        _counts: &WinCountMatrix,
        _rng: &mut ChaCha8Rng,
        first: usize,
        second: usize,
        verdict: Verdict,
    ) {
        if self.winner.is_some() || !self.active.contains(&first) || !self.active.contains(&second) {
            return;
        }
        self.wins[first * self.k + second] += verdict.value();
        self.trials[first * self.k + second] += 1;
        self.try_eliminate();
    }

    fn declared_winner(&self) -> Option<usize> {
        self.winner
    }

    fn active(&self, _k: usize) -> Vec<usize> {
        self.active.clone()
    }
}
