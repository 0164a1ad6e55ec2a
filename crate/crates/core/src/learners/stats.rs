//! Confidence bounds and small selection helpers shared by the learners.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::preference::WinCountMatrix;

/// `ln t` with `t` = duels applied so far + 1.
pub(crate) fn ln_time(counts: &WinCountMatrix) -> f64 {
    ((counts.total() + 1) as f64).ln()
}

/// Optimistic estimate `p̂_ij + sqrt(alpha ln t / n_ij)`; 1 for unexplored
/// pairs and 1/2 on the diagonal.
pub(crate) fn ucb(counts: &WinCountMatrix, i: usize, j: usize, alpha: f64, ln_t: f64) -> f64 {
    if i == j {
        return 0.5;
    }
    let n = counts.trials(i, j);
    if n == 0 {
        1.0
    } else {
        counts.p_hat(i, j) + (alpha * ln_t / n as f64).sqrt()
    }
}

/// Pessimistic counterpart of [`ucb`]; 0 for unexplored pairs.
pub(crate) fn lcb(counts: &WinCountMatrix, i: usize, j: usize, alpha: f64, ln_t: f64) -> f64 {
    if i == j {
        return 0.5;
    }
    let n = counts.trials(i, j);
    if n == 0 {
        0.0
    } else {
        counts.p_hat(i, j) - (alpha * ln_t / n as f64).sqrt()
    }
}

/// Anytime Hoeffding radius, union-bounded over all `k^2` ordered pairs and
/// sample sizes: `sqrt(ln(4 k^2 n^2 / delta) / (2n))`.
pub(crate) fn hoeffding_radius(n: u64, k: usize, delta: f64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let n = n as f64;
    let k = k as f64;
    ((4.0 * k * k * n * n / delta).ln() / (2.0 * n)).sqrt()
}

/// Bernoulli KL divergence `d(p || q)`.
pub(crate) fn kl_bernoulli(p: f64, q: f64) -> f64 {
    const EPS: f64 = 1e-15;
    let q = q.clamp(EPS, 1.0 - EPS);
    let term = |a: f64, b: f64| if a <= 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// Index of the largest value, ties broken uniformly at random.
pub(crate) fn argmax_random(
    rng: &mut ChaCha8Rng,
    items: impl IntoIterator<Item = (usize, f64)>,
) -> Option<usize> {
    let mut best = f64::NEG_INFINITY;
    let mut ties: Vec<usize> = Vec::new();
    for (i, v) in items {
        if v > best {
            best = v;
            ties.clear();
            ties.push(i);
        } else if v == best {
            ties.push(i);
        }
    }
    match ties.len() {
        0 => None,
        1 => Some(ties[0]),
        n => Some(ties[rng.random_range(0..n)]),
    }
}

/// Index of the smallest value, ties broken uniformly at random.
pub(crate) fn argmin_random(
    rng: &mut ChaCha8Rng,
    items: impl IntoIterator<Item = (usize, f64)>,
) -> Option<usize> {
    argmax_random(rng, items.into_iter().map(|(i, v)| (i, -v)))
}
