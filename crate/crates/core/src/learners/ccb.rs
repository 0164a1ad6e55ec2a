use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::{argmax_random, lcb, ln_time, ucb};
use super::Strategy;
use crate::preference::WinCountMatrix;

/// Copeland Confidence Bound.
///
/// Keeps a set of hypothesized Copeland winners and, for each system `i`, a
/// set of opponents that may beat it. Hypotheses are reset as soon as the
/// confidence bounds contradict them. The first system comes from the
/// optimistic Copeland leaders (preferring current hypotheses); the second is
/// the opponent most likely to refute it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ccb {
    alpha: f64,
    hypotheses: Vec<bool>,
    challengers: Vec<Vec<bool>>,
    max_losses: usize,
}

impl Ccb {
    pub fn new(k: usize, alpha: f64) -> Self {
        let mut s = Ccb {
            alpha,
            hypotheses: Vec::new(),
            challengers: Vec::new(),
            max_losses: k,
        };
        s.reset(k);
        s
    }

    fn reset(&mut self, k: usize) {
        self.hypotheses = vec![true; k];
        self.max_losses = k;
        self.challengers = (0..k).map(|i| (0..k).map(|j| j != i).collect()).collect();
    }

    fn set_size(set: &[bool]) -> usize {
        set.iter().filter(|&&b| b).count()
    }

    fn update_hypotheses(
        &mut self,
        k: usize,
        rng: &mut ChaCha8Rng,
        upper: &[Vec<f64>],
        lower: &[Vec<f64>],
        cu: &[usize],
        cl: &[usize],
        leaders: &[usize],
    ) {
        // Reset disproven hypotheses.
        let disproven = (0..k).any(|i| (0..k).any(|j| self.challengers[i][j] && lower[i][j] > 0.5));
        if disproven {
            self.reset(k);
        }
        // Remove systems that cannot be Copeland winners.
        let best_cl = cl.iter().copied().max().unwrap_or(0);
        for i in 0..k {
            if self.hypotheses[i] && cu[i] < best_cl {
                self.hypotheses[i] = false;
                if Self::set_size(&self.challengers[i]) != self.max_losses + 1 {
                    self.challengers[i] = (0..k).map(|j| j != i && upper[i][j] < 0.5).collect();
                }
            }
        }
        if Self::set_size(&self.hypotheses) == 0 {
            self.reset(k);
        }
        // Add resolved Copeland leaders.
        for &i in leaders {
            if cu[i] == cl[i] {
                self.hypotheses[i] = true;
                self.challengers[i] = vec![false; k];
                self.max_losses = k - 1 - cu[i];
                for j in (0..k).filter(|&j| j != i) {
                    let size = Self::set_size(&self.challengers[j]);
                    let cap = self.max_losses + 1;
                    if size < cap {
                        self.challengers[j] = vec![false; k];
                    } else if size > cap {
                        let mut members: Vec<usize> =
                            (0..k).filter(|&x| self.challengers[j][x]).collect();
                        members.shuffle(rng);
                        let mut kept = vec![false; k];
                        for &x in &members[..cap] {
                            kept[x] = true;
                        }
                        self.challengers[j] = kept;
                    }
                }
            }
        }
    }
}

impl Strategy for Ccb {
    fn select(&mut self, counts: &WinCountMatrix, rng: &mut ChaCha8Rng) -> (usize, usize) {
        let k = counts.k();
        let ln_t = ln_time(counts);
        let upper: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| ucb(counts, i, j, self.alpha, ln_t)).collect())
            .collect();
        let lower: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| lcb(counts, i, j, self.alpha, ln_t)).collect())
            .collect();
        let cu: Vec<usize> = (0..k)
            .map(|i| (0..k).filter(|&j| j != i && upper[i][j] >= 0.5).count())
            .collect();
        let cl: Vec<usize> = (0..k)
            .map(|i| (0..k).filter(|&j| j != i && lower[i][j] > 0.5).count())
            .collect();
        let best_cu = *cu.iter().max().expect("k >= 2");
        let leaders: Vec<usize> = (0..k).filter(|&i| cu[i] == best_cu).collect();

        self.update_hypotheses(k, rng, &upper, &lower, &cu, &cl, &leaders);

        // Occasionally probe an unresolved hypothesized challenger pair.
        if rng.random_bool(0.25) {
            let open: Vec<(usize, usize)> = (0..k)
                .flat_map(|i| (0..k).map(move |j| (i, j)))
                .filter(|&(i, j)| {
                    self.challengers[i][j] && lower[i][j] <= 0.5 && 0.5 <= upper[i][j]
                })
                .collect();
            if !open.is_empty() {
                return open[rng.random_range(0..open.len())];
            }
        }

        let mut pool = leaders;
        let focused: Vec<usize> = pool.iter().copied().filter(|&i| self.hypotheses[i]).collect();
        if !focused.is_empty() && rng.random_bool(2.0 / 3.0) {
            pool = focused;
        }
        let c = pool[rng.random_range(0..pool.len())];

        let restricted = rng.random_bool(0.5) && Self::set_size(&self.challengers[c]) > 0;
        let d = argmax_random(
            rng,
            (0..k)
                .filter(|&j| j != c && (!restricted || self.challengers[c][j]))
                .map(|j| (j, upper[j][c])),
        )
        .expect("k >= 2");
        (c, d)
    }
}
