use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Draw, EnvironmentError, PreferenceSource};
use crate::preference::{PreferenceMatrix, Preferences, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Generator {
    /// Row-major `k x k` win probabilities.
    Matrix { p: Vec<Vec<f64>> },
    /// Bradley-Terry-Luce utilities, `p_ij = u_i / (u_i + u_j)`.
    Btl { utilities: Vec<f64> },
    /// BTL with utilities `ratio^i`; system `k - 1` is the Condorcet winner.
    Geometric { k: usize, ratio: f64 },
}

/// Declarative description of a synthetic annotator.
///
/// A query of `(i, j)` yields a win, tie or loss with probabilities
/// `((1 - t) p_ij, t, (1 - t)(1 - p_ij))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub generator: Generator,
    #[serde(default)]
    pub tie: f64,
}

impl SyntheticSpec {
    pub fn btl(utilities: Vec<f64>, tie: f64) -> Self {
        SyntheticSpec { generator: Generator::Btl { utilities }, tie }
    }

    /// BTL with utilities `ratio^i`, so system `k - 1` is the Condorcet winner.
    pub fn geometric_btl(k: usize, ratio: f64, tie: f64) -> Self {
        SyntheticSpec { generator: Generator::Geometric { k, ratio }, tie }
    }

    pub fn matrix(p: Vec<Vec<f64>>, tie: f64) -> Self {
        SyntheticSpec { generator: Generator::Matrix { p }, tie }
    }

    pub fn k(&self) -> usize {
        match &self.generator {
            Generator::Matrix { p } => p.len(),
            Generator::Btl { utilities } => utilities.len(),
            Generator::Geometric { k, .. } => *k,
        }
    }

    pub fn build(&self) -> Result<SyntheticSource, EnvironmentError> {
        if !(0.0..=1.0).contains(&self.tie) {
            return Err(EnvironmentError::InvalidSpec(format!("tie mass {} outside [0, 1]", self.tie)));
        }
        let matrix = match &self.generator {
            Generator::Matrix { p } => {
                let k = p.len();
                if p.iter().any(|row| row.len() != k) {
                    return Err(EnvironmentError::InvalidSpec("matrix is not square".into()));
                }
                PreferenceMatrix::new(k, p.iter().flatten().copied().collect())?
            }
            Generator::Geometric { k, ratio } => {
                if !(*ratio > 0.0 && ratio.is_finite()) {
                    return Err(EnvironmentError::InvalidSpec(format!("ratio {ratio} is not positive")));
                }
                let utilities: Vec<f64> = (0..*k).map(|i| ratio.powi(i as i32)).collect();
                PreferenceMatrix::from_btl(&utilities)?
            }
            Generator::Btl { utilities } => {
                if let Some(u) = utilities.iter().find(|u| !(**u > 0.0 && u.is_finite())) {
                    return Err(EnvironmentError::InvalidSpec(format!("utility {u} is not positive")));
                }
                PreferenceMatrix::from_btl(utilities)?
            }
        };
        Ok(SyntheticSource { matrix, tie: self.tie })
    }
}

/// Annotator drawing outcomes from a preference matrix plus tie mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSource {
    matrix: PreferenceMatrix,
    tie: f64,
}

impl SyntheticSource {
    pub fn preference(&self) -> &PreferenceMatrix {
        &self.matrix
    }

    pub fn tie(&self) -> f64 {
        self.tie
    }

    pub fn sample(&self, first: usize, second: usize, rng: &mut ChaCha8Rng) -> Verdict {
        let p = self.matrix.get(first, second);
        let u: f64 = rng.random();
        let win = (1.0 - self.tie) * p;
        if u < win {
            Verdict::Win
        } else if u < win + self.tie {
            Verdict::Tie
        } else {
            Verdict::Loss
        }
    }
}

impl PreferenceSource for SyntheticSource {
    fn k(&self) -> usize {
        Preferences::k(&self.matrix)
    }

    fn draw(&self, first: usize, second: usize, rng: &mut ChaCha8Rng) -> Result<Draw, EnvironmentError> {
        let k = self.k();
        if first >= k || second >= k {
            return Err(EnvironmentError::UnknownSystem(first.max(second).to_string()));
        }
        Ok(Draw::new(first, second, 0, self.sample(first, second, rng)))
    }

    /// With ties counted as half a win, `E[w] = (1 - t) p + t / 2`.
    fn matrix(&self) -> PreferenceMatrix {
        let k = self.k();
        PreferenceMatrix::from_upper(k, |i, j| (1.0 - self.tie) * self.matrix.get(i, j) + self.tie / 2.0)
            .expect("mixture of valid probabilities is valid")
    }

    fn example_name(&self, _e: usize) -> String {
        "synthetic".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn btl_three_to_one() {
        let s = SyntheticSpec::btl(vec![3.0, 1.0], 0.0).build().unwrap();
        assert_eq!(s.preference().get(0, 1), 0.75);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 100_000;
        let wins = (0..n).filter(|_| s.sample(0, 1, &mut rng) == Verdict::Win).count();
        assert!((wins as f64 / n as f64 - 0.75).abs() < 0.01);
    }

    #[test]
    fn full_tie_mass() {
        let s = SyntheticSpec::btl(vec![3.0, 1.0, 2.0], 1.0).build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..1000).all(|_| s.sample(0, 2, &mut rng) == Verdict::Tie));
    }

    #[test]
    fn explicit_matrix_round_trip() {
        let p = vec![
            vec![0.5, 0.7, 0.6],
            vec![0.3, 0.5, 0.8],
            vec![0.4, 0.2, 0.5],
        ];
        let s = SyntheticSpec::matrix(p.clone(), 0.0).build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            let mean: f64 = (0..n).map(|_| s.sample(i, j, &mut rng).value()).sum::<f64>() / n as f64;
            assert!((mean - p[i][j]).abs() < 0.01, "({i},{j}) {mean}");
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(SyntheticSpec::btl(vec![1.0, 0.0], 0.0).build().is_err());
        assert!(SyntheticSpec::btl(vec![1.0, 2.0], 1.5).build().is_err());
        assert!(SyntheticSpec::matrix(vec![vec![0.5, 0.7], vec![0.7, 0.5]], 0.0).build().is_err());
    }

    #[test]
    fn geometric_winner_is_last() {
        let s = SyntheticSpec::geometric_btl(5, 1.3, 0.2).build().unwrap();
        assert_eq!(crate::preference::condorcet_winner(&s.matrix()).unwrap().0, 4);
    }
}
