use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::hoeffding_radius;
use super::Strategy;
use crate::preference::{Verdict, WinCountMatrix};

/// One QuickSort partition step: every member is compared to the pivot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Partition {
    pivot: usize,
    queue: Vec<usize>,
    awaiting: Vec<usize>,
    above: Vec<usize>,
    below: Vec<usize>,
}

/// Preference-based racing driven by budgeted QuickSort runs, in the spirit of
/// PAC learning under the Plackett-Luce model.
///
/// Each run sorts the active systems with randomized QuickSort and stops after
/// `ceil(k log2 k)` comparisons. Every comparison feeds the shared counts, and a
/// system leaves the race as soon as some other system beats it with
/// confidence. Terminates with a single active system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlackettLuce {
    delta: f64,
    active: Vec<bool>,
    segments: Vec<Vec<usize>>,
    current: Option<Partition>,
    run_budget: u64,
    run_used: u64,
    runs: u64,
    winner: Option<usize>,
}

impl PlackettLuce {
    pub fn new(k: usize, delta: f64) -> Self {
        PlackettLuce {
            delta,
            active: vec![true; k],
            segments: Vec::new(),
            current: None,
            run_budget: 0,
            run_used: 0,
            runs: 0,
            winner: None,
        }
    }

    /// Completed or started QuickSort runs.
    pub fn runs(&self) -> u64 {
        self.runs
    }

    fn active_list(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&i| self.active[i]).collect()
    }

    fn start_run(&mut self) {
        let members = self.active_list();
        let k = members.len() as f64;
        self.run_budget = (k * k.log2()).ceil().max(1.0) as u64;
        self.run_used = 0;
        self.runs += 1;
        self.segments = vec![members];
    }

    fn next_partition(&mut self, rng: &mut ChaCha8Rng) -> bool {
        loop {
            if self.run_used >= self.run_budget || self.segments.is_empty() {
                self.start_run();
            }
            let seg: Vec<usize> = self
                .segments
                .pop()
                .expect("run has a segment")
                .into_iter()
                .filter(|&i| self.active[i])
                .collect();
            if seg.len() < 2 {
                if self.segments.is_empty() && self.run_used == 0 {
                    return false;
                }
                continue;
            }
            let pivot = seg[rng.random_range(0..seg.len())];
            let mut queue: Vec<usize> = seg.into_iter().filter(|&i| i != pivot).collect();
            queue.shuffle(rng);
            self.current = Some(Partition {
                pivot,
                queue,
                awaiting: Vec::new(),
                above: Vec::new(),
                below: Vec::new(),
            });
            return true;
        }
    }

    fn finish_partition(&mut self) {
        let Some(p) = &self.current else { return };
        if !(p.queue.is_empty() && p.awaiting.is_empty()) {
            return;
        }
        let p = self.current.take().expect("checked above");
        // Push the worse half first so the better half is sorted first.
        for seg in [p.below, p.above] {
            if seg.len() >= 2 {
                self.segments.push(seg);
            }
        }
    }

    fn eliminate(&mut self, counts: &WinCountMatrix) {
        let k = self.active.len();
        let members = self.active_list();
        let beaten: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&i| {
                members.iter().any(|&j| {
                    let n = counts.trials(j, i);
                    j != i
                        && n > 0
                        && counts.p_hat(j, i) - hoeffding_radius(n, k, self.delta) > 0.5
                })
            })
            .collect();
        for i in beaten {
            self.active[i] = false;
        }
        let left = self.active_list();
        if left.len() == 1 {
            self.winner = Some(left[0]);
        }
    }
}

impl Strategy for PlackettLuce {
    fn select(&mut self, _counts: &WinCountMatrix, rng: &mut ChaCha8Rng) -> (usize, usize) {
        loop {
            if self.current.is_none() && !self.next_partition(rng) {
                break;
            }
            let active = &self.active;
            let p = self.current.as_mut().expect("partition is set");
            p.queue.retain(|&i| active[i]);
            if !active[p.pivot] {
                self.current = None;
                continue;
            }
            if let Some(x) = p.queue.pop() {
                p.awaiting.push(x);
                self.run_used += 1;
                return (x, p.pivot);
            }
            break;
        }
        // Waiting on late feedback: keep annotators busy with a random active pair.
        let members = self.active_list();
        let i = rng.random_range(0..members.len());
        let mut j = rng.random_range(0..members.len() - 1);
        if j >= i {
            j += 1;
        }
        (members[i], members[j])
    }

    fn observe(
        &mut self,
        counts: &WinCountMatrix,
        rng: &mut ChaCha8Rng,
        first: usize,
        second: usize,
        verdict: Verdict,
    ) {
        if self.winner.is_some() {
            return;
        }
        if let Some(p) = self.current.as_mut() {
            let (x, v) = if second == p.pivot {
                (first, verdict.value())
            } else if first == p.pivot {
                (second, 1.0 - verdict.value())
            } else {
                (usize::MAX, 0.0)
            };
            if let Some(pos) = p.awaiting.iter().position(|&a| a == x) {
                p.awaiting.swap_remove(pos);
                let wins = v > 0.5 || (v == 0.5 && rng.random_bool(0.5));
                if wins {
                    p.above.push(x);
                } else {
                    p.below.push(x);
                }
            }
        }
        self.eliminate(counts);
        if let Some(p) = self.current.as_mut() {
            let active = &self.active;
            p.awaiting.retain(|&i| active[i]);
            p.queue.retain(|&i| active[i]);
        }
        self.finish_partition();
    }

    fn declared_winner(&self) -> Option<usize> {
        self.winner
    }

    fn active(&self, _k: usize) -> Vec<usize> {
        self.active_list()
    }
}
