//! Brute-force reference implementations written straight from the
//! definitions, sharing no code with the library.

/// Copeland counts: opponents each system beats with probability above 1/2.
pub fn copeland_counts(p: &[Vec<f64>]) -> Vec<usize> {
    let k = p.len();
    let mut counts = vec![0; k];
    for (i, row) in p.iter().enumerate() {
        for (j, &pij) in row.iter().enumerate() {
            if i != j && pij > 0.5 {
                counts[i] += 1;
            }
        }
    }
    counts
}

/// `(last crossing, first crossing)` from a `traces x checkpoints` table of
/// "recommended the truth" flags, scanning every candidate start point.
pub fn complexity(correct: &[Vec<bool>], delta: f64, stride: u64) -> (Option<u64>, Option<u64>) {
    let t = correct.len();
    let c = correct[0].len();
    let ok = |cp: usize| {
        let n = correct.iter().filter(|row| row[cp]).count();
        n as f64 / t as f64 > 1.0 - delta
    };
    let mut last = None;
    for start in 0..c {
        if (start..c).all(ok) {
            last = Some(start as u64 * stride);
            break;
        }
    }
    let first = (0..c).find(|&cp| ok(cp)).map(|cp| cp as u64 * stride);
    (last, first)
}

pub struct Elimination {
    /// `[i][j]` for `i != j`.
    pub p_hat: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub wins: Vec<usize>,
    pub survivors: Vec<usize>,
}

/// Optimistic Copeland pruning for the linear model `p = 1/2 + (x - y) / (2 delta)`,
/// clamped to `[0, 1]`. `scores[system][example][sample]`.
pub fn ucb(scores: &[Vec<Vec<f64>>], delta: f64, alpha: f64, tau: f64) -> Elimination {
    let k = scores.len();
    let n = scores[0].len();
    let mut p_hat = vec![vec![0.5; k]; k];
    let mut sigma = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let mut mean_total = 0.0;
            let mut var_total = 0.0;
            for e in 0..n {
                let ps: Vec<f64> = scores[i][e]
                    .iter()
                    .zip(&scores[j][e])
                    .map(|(x, y)| (0.5 + (x / (2.0 * delta) - y / (2.0 * delta))).clamp(0.0, 1.0))
                    .collect();
                let l = ps.len() as f64;
                let m = ps.iter().sum::<f64>() / l;
                mean_total += m;
                var_total += ps.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / l;
            }
            p_hat[i][j] = mean_total / n as f64;
            p_hat[j][i] = 1.0 - mean_total / n as f64;
            sigma[i][j] = var_total.sqrt() / n as f64;
            sigma[j][i] = sigma[i][j];
        }
    }
    let wins: Vec<usize> = (0..k)
        .map(|i| (0..k).filter(|&j| j != i && p_hat[i][j] + alpha * sigma[i][j] > 0.5).count())
        .collect();
    let mut survivors: Vec<usize> = (0..k).filter(|&i| wins[i] as f64 / (k - 1) as f64 >= tau).collect();
    if survivors.is_empty() {
        let best = *wins.iter().max().unwrap();
        survivors = (0..k).filter(|&i| wins[i] == best).collect();
    }
    Elimination { p_hat, sigma, wins, survivors }
}

/// Mutual information in bits between a Bernoulli prediction and the sample index.
pub fn bald_bits(samples: &[f64]) -> f64 {
    let h = |p: f64| {
        let mut s = 0.0;
        for q in [p, 1.0 - p] {
            if q > 0.0 {
                s -= q * q.log2();
            }
        }
        s
    };
    let l = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / l;
    h(mean) - samples.iter().map(|&p| h(p)).sum::<f64>() / l
}
