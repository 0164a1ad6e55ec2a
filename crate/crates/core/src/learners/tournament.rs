//! Knockout-style tournaments built from repeated duels between two systems.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Strategy;
use crate::preference::{Verdict, WinCountMatrix};

/// When a duel has seen enough comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule")]
pub enum StopRule {
    /// Stop after exactly `m` comparisons.
    Fixed { m: u64 },
    /// Stop once `|p̂ - 1/2|` exceeds the anytime radius minus `epsilon`, or
    /// after `(1 / (2 epsilon^2)) ln(2 / delta)` comparisons.
    Confidence { epsilon: f64, delta: f64 },
}

impl StopRule {
    fn budget(&self) -> u64 {
        match *self {
            StopRule::Fixed { m } => m,
            StopRule::Confidence { epsilon, delta } => {
                ((2.0 / delta).ln() / (2.0 * epsilon * epsilon)).ceil() as u64
            }
        }
    }
}

/// Repeated comparisons of `a` against `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Duel {
    pub a: usize,
    pub b: usize,
    /// Wins of `a`; ties count half.
    pub wins_a: f64,
    pub n: u64,
    rule: StopRule,
    winner: Option<usize>,
}

impl Duel {
    pub fn new(a: usize, b: usize, rule: StopRule) -> Self {
        Duel { a, b, wins_a: 0.0, n: 0, rule, winner: None }
    }

    pub fn p_hat(&self) -> f64 {
        if self.n == 0 {
            0.5
        } else {
            self.wins_a / self.n as f64
        }
    }

    pub fn winner(&self) -> Option<usize> {
        self.winner
    }

    pub fn involves(&self, x: usize, y: usize) -> bool {
        (self.a == x && self.b == y) || (self.a == y && self.b == x)
    }

    /// Records one comparison of the duel's pair; returns true when it just
    /// finished.
    pub fn record(&mut self, rng: &mut ChaCha8Rng, first: usize, verdict: Verdict) -> bool {
        if self.winner.is_some() {
            return false;
        }
        let v = if first == self.a { verdict.value() } else { 1.0 - verdict.value() };
        self.wins_a += v;
        self.n += 1;
        let done = self.n >= self.rule.budget()
            || match self.rule {
                StopRule::Fixed { .. } => false,
                StopRule::Confidence { epsilon, delta } => {
                    let r = self.n as f64;
                    let radius = ((4.0 * r * r / delta).ln() / (2.0 * r)).sqrt();
                    (self.p_hat() - 0.5).abs() > radius - epsilon
                }
            };
        if done {
            let p = self.p_hat();
            self.winner = Some(if p > 0.5 {
                self.a
            } else if p < 0.5 {
                self.b
            } else if rng.random_bool(0.5) {
                self.a
            } else {
                self.b
            });
        }
        done
    }
}

/// Round-based bracket shared by [`Knockout`] and [`SingleElimination`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Bracket {
    round: u32,
    duels: Vec<Duel>,
    bye: Option<usize>,
    cursor: usize,
    winner: Option<usize>,
}

impl Bracket {
    fn new(mut players: Vec<usize>, rng: &mut ChaCha8Rng, rule: impl Fn(u32) -> StopRule) -> Self {
        players.shuffle(rng);
        let mut b = Bracket { round: 0, duels: Vec::new(), bye: None, cursor: 0, winner: None };
        b.start_round(players, &rule);
        b
    }

    fn start_round(&mut self, players: Vec<usize>, rule: &impl Fn(u32) -> StopRule) {
        if players.len() == 1 {
            self.winner = Some(players[0]);
            self.duels.clear();
            self.bye = None;
            return;
        }
        self.round += 1;
        let stop = rule(self.round);
        self.duels = players
            .chunks_exact(2)
            .map(|c| Duel::new(c[0], c[1], stop))
            .collect();
        self.bye = (players.len() % 2 == 1).then(|| players[players.len() - 1]);
        self.cursor = 0;
    }

    fn select(&mut self, rng: &mut ChaCha8Rng) -> (usize, usize) {
        let open: Vec<usize> = (0..self.duels.len())
            .filter(|&i| self.duels[i].winner.is_none())
            .collect();
        // Spread requests across unfinished duels so late feedback does not
        // stall the bracket.
        let i = if open.is_empty() {
            rng.random_range(0..self.duels.len())
        } else {
            self.cursor %= open.len();
            let i = open[self.cursor];
            self.cursor += 1;
            i
        };
        (self.duels[i].a, self.duels[i].b)
    }

    fn observe(
        &mut self,
        rng: &mut ChaCha8Rng,
        first: usize,
        second: usize,
        verdict: Verdict,
        rule: &impl Fn(u32) -> StopRule,
    ) {
        if self.winner.is_some() {
            return;
        }
        let Some(duel) = self.duels.iter_mut().find(|d| d.involves(first, second)) else {
            return;
        };
        duel.record(rng, first, verdict);
        if self.duels.iter().all(|d| d.winner.is_some()) {
            let mut next: Vec<usize> = self.duels.iter().filter_map(|d| d.winner).collect();
            next.extend(self.bye);
            self.start_round(next, rule);
        }
    }

    fn active(&self) -> Vec<usize> {
        if let Some(w) = self.winner {
            return vec![w];
        }
        let mut v: Vec<usize> = self.duels.iter().flat_map(|d| [d.a, d.b]).collect();
        v.extend(self.bye);
        v.sort_unstable();
        v
    }
}

/// Knockout tournament with per-round accuracy and confidence schedules.
///
/// Round `i` runs its duels at accuracy `gamma (2^{1/3} - 1) epsilon / 2^{i/3}`
/// and confidence `delta / 2^i`. With an odd number of players the last one in
/// the shuffled bracket gets a bye.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knockout {
    epsilon: f64,
    delta: f64,
    gamma: f64,
    bracket: Bracket,
}

fn knockout_rule(epsilon: f64, delta: f64, gamma: f64) -> impl Fn(u32) -> StopRule {
    move |round| {
        let i = round as f64;
        StopRule::Confidence {
            epsilon: gamma * (2f64.powf(1.0 / 3.0) - 1.0) * epsilon / 2f64.powf(i / 3.0),
            delta: delta / 2f64.powf(i),
        }
    }
}

impl Knockout {
    pub fn new(k: usize, epsilon: f64, delta: f64, gamma: f64, rng: &mut ChaCha8Rng) -> Self {
        let bracket = Bracket::new((0..k).collect(), rng, knockout_rule(epsilon, delta, gamma));
        Knockout { epsilon, delta, gamma, bracket }
    }

    pub fn round(&self) -> u32 {
        self.bracket.round
    }

    pub fn duels(&self) -> &[Duel] {
        &self.bracket.duels
    }

    pub fn bye(&self) -> Option<usize> {
        self.bracket.bye
    }
}

impl Strategy for Knockout {
    fn select(&mut self, _counts: &WinCountMatrix, rng: &mut ChaCha8Rng) -> (usize, usize) {
        self.bracket.select(rng)
    }

    fn observe(
        &mut self,
        _counts: &WinCountMatrix,
        rng: &mut ChaCha8Rng,
        first: usize,
        second: usize,
        verdict: Verdict,
    ) {
        let rule = knockout_rule(self.epsilon, self.delta, self.gamma);
        self.bracket.observe(rng, first, second, verdict, &rule);
    }

    fn declared_winner(&self) -> Option<usize> {
        self.bracket.winner
    }

    fn active(&self, _k: usize) -> Vec<usize> {
        self.bracket.active()
    }
}

/// Knockout tournament with a fixed number of comparisons per duel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleElimination {
    m: u64,
    bracket: Bracket,
}

impl SingleElimination {
    pub fn new(k: usize, m: u64, rng: &mut ChaCha8Rng) -> Self {
        let bracket = Bracket::new((0..k).collect(), rng, move |_| StopRule::Fixed { m });
        SingleElimination { m, bracket }
    }

    pub fn duels(&self) -> &[Duel] {
        &self.bracket.duels
    }
}

impl Strategy for SingleElimination {
    fn select(&mut self, _counts: &WinCountMatrix, rng: &mut ChaCha8Rng) -> (usize, usize) {
        self.bracket.select(rng)
    }

    fn observe(
        &mut self,
        _counts: &WinCountMatrix,
        rng: &mut ChaCha8Rng,
        first: usize,
        second: usize,
        verdict: Verdict,
    ) {
        let m = self.m;
        self.bracket
            .observe(rng, first, second, verdict, &move |_| StopRule::Fixed { m });
    }

    fn declared_winner(&self) -> Option<usize> {
        self.bracket.winner
    }

    fn active(&self, _k: usize) -> Vec<usize> {
        self.bracket.active()
    }
}

/// A running champion meets every other system once, in random order; the
/// winner of each duel carries on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialElimination {
    queue: Vec<usize>,
    duel: Duel,
    rule: StopRule,
    winner: Option<usize>,
}

impl SequentialElimination {
    pub fn new(k: usize, epsilon: f64, delta: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(rng);
        let rule = StopRule::Confidence { epsilon, delta: delta / (k - 1) as f64 };
        let champion = order.remove(0);
        let challenger = order.remove(0);
        SequentialElimination {
            queue: order,
            duel: Duel::new(champion, challenger, rule),
            rule,
            winner: None,
        }
    }

    pub fn champion(&self) -> usize {
        self.winner.unwrap_or(self.duel.a)
    }
}

impl Strategy for SequentialElimination {
    fn select(&mut self, _counts: &WinCountMatrix, _rng: &mut ChaCha8Rng) -> (usize, usize) {
        (self.duel.a, self.duel.b)
    }

    fn observe(
        &mut self,
        _counts: &WinCountMatrix,
        rng: &mut ChaCha8Rng,
        first: usize,
        second: usize,
        verdict: Verdict,
    ) {
        if self.winner.is_some() || !self.duel.involves(first, second) {
            return;
        }
        if self.duel.record(rng, first, verdict) {
            let champion = self.duel.winner.expect("finished duel has a winner");
            if self.queue.is_empty() {
                self.winner = Some(champion);
            } else {
                let next = self.queue.remove(0);
                self.duel = Duel::new(champion, next, self.rule);
            }
        }
    }

    fn declared_winner(&self) -> Option<usize> {
        self.winner
    }

    fn active(&self, _k: usize) -> Vec<usize> {
        if let Some(w) = self.winner {
            return vec![w];
        }
        let mut v = self.queue.clone();
        v.extend([self.duel.a, self.duel.b]);
        v.sort_unstable();
        v
    }
}
