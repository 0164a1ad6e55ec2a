//! Pairwise probability models that turn direct-assessment metric scores into
//! preference probabilities and three-way predicted outcomes.
//!
//! Three models are supported, all evaluated on *preprocessed* scores `f`:
//!
//! * Linear: `p = 1/2 + (f1 - f2)`
//! * BTL: `p = f1 / (f1 + f2)`
//! * BTL-logistic: `p = sigmoid(f1 - f2)`, with the temperature folded into the
//!   preprocessing (`f = f_raw / gamma`).
//!
//! A probability is mapped to an outcome with two thresholds `tau1 <= tau2`:
//! `1` above `tau2`, `0` below `tau1`, a tie in between.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preference::Verdict;

/// Grid resolution of threshold calibration.
pub const THRESHOLD_STEP: f64 = 0.001;
/// Inclusive bounds of the BTL-logistic temperature search.
pub const GAMMA_RANGE: (f64, f64) = (0.005, 1.0);
/// Step of the temperature grid.
pub const GAMMA_STEP: f64 = 0.005;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbabilityError {
    #[error("BTL is undefined when both preprocessed scores are zero")]
    DegenerateBtl,
    #[error("BTL needs non-negative preprocessed scores, got ({0}, {1})")]
    NegativeBtl(f64, f64),
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("invalid thresholds ({0}, {1}): need 0.4 <= tau1 <= 0.5 <= tau2 <= 0.6")]
    InvalidThresholds(f64, f64),
    #[error("gamma {0} outside [0.005, 1]")]
    InvalidGamma(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbabilityModelKind {
    Linear,
    Btl,
    BtlLogistic,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `p̂(Y1 ≻ Y2)` from preprocessed scores. Linear output is *not* clamped here;
/// see [`FittedModel::probability`] for the clamped path.
pub fn preference_probability(
    model: ProbabilityModelKind,
    f1: f64,
    f2: f64,
) -> Result<f64, ProbabilityError> {
    match model {
        ProbabilityModelKind::Linear => Ok(0.5 + (f1 - f2)),
        ProbabilityModelKind::Btl => {
            if f1 < 0.0 || f2 < 0.0 {
                return Err(ProbabilityError::NegativeBtl(f1, f2));
            }
            let denom = f1 + f2;
            if denom == 0.0 {
                Err(ProbabilityError::DegenerateBtl)
            } else {
                Ok(f1 / denom)
            }
        }
        ProbabilityModelKind::BtlLogistic => Ok(sigmoid(f1 - f2)),
    }
}

/// Two-threshold tie band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub tau1: f64,
    pub tau2: f64,
}

impl ThresholdPair {
    pub fn new(tau1: f64, tau2: f64) -> Result<Self, ProbabilityError> {
        let ok = (0.4..=0.5).contains(&tau1) && (0.5..=0.6).contains(&tau2) && tau1 <= tau2;
        if ok {
            Ok(ThresholdPair { tau1, tau2 })
        } else {
            Err(ProbabilityError::InvalidThresholds(tau1, tau2))
        }
    }

    fn from_grid(a: usize, b: usize) -> Self {
        ThresholdPair {
            tau1: (400 + a) as f64 / 1000.0,
            tau2: (500 + b) as f64 / 1000.0,
        }
    }
}

impl Default for ThresholdPair {
    fn default() -> Self {
        ThresholdPair { tau1: 0.45, tau2: 0.55 }
    }
}

pub fn predict_outcome(p: f64, t: ThresholdPair) -> Verdict {
    if p > t.tau2 {
        Verdict::Win
    } else if p < t.tau1 {
        Verdict::Loss
    } else {
        Verdict::Tie
    }
}

/// Grid search over `tau1 ∈ [0.4, 0.5]`, `tau2 ∈ [0.5, 0.6]` (step 0.001)
/// maximizing three-way accuracy. Ties go to the narrowest band, then the
/// smallest `tau1`. Returns the thresholds and their accuracy.
pub fn calibrate_thresholds(
    validation: &[(f64, Verdict)],
) -> Result<(ThresholdPair, f64), ProbabilityError> {
    if validation.is_empty() {
        return Err(ProbabilityError::EmptyValidation);
    }
    // Probabilities are compared against grid values `g/1000`. For each grid
    // index we need: #wins with p > tau2, #losses with p < tau1, #ties inside.
    const GRID: usize = 101;
    let grid = |g: usize| g as f64 / 1000.0;
    // losses_below[a] = #losses with p < 0.400 + a/1000
    let mut losses_below = [0usize; GRID];
    // wins_above[b] = #wins with p > 0.500 + b/1000
    let mut wins_above = [0usize; GRID];
    // ties_ge[a] = #ties with p >= tau1(a); ties_gt[b] = #ties with p > tau2(b)
    let mut ties_ge = [0usize; GRID];
    let mut ties_gt = [0usize; GRID];
    for &(p, w) in validation {
        for g in 0..GRID {
            let t1 = grid(400 + g);
            let t2 = grid(500 + g);
            match w {
                Verdict::Loss if p < t1 => losses_below[g] += 1,
                Verdict::Win if p > t2 => wins_above[g] += 1,
                Verdict::Tie => {
                    if p >= t1 {
                        ties_ge[g] += 1;
                    }
                    if p > t2 {
                        ties_gt[g] += 1;
                    }
                }
                _ => {}
            }
        }
    }
    let mut best: Option<(usize, usize, usize)> = None; // (correct, a, b)
    for a in 0..GRID {
        for b in 0..GRID {
            // tau2 >= tau1, so every tie above tau2 is also counted in ties_ge[a].
            let correct = losses_below[a] + wins_above[b] + ties_ge[a] - ties_gt[b];
            let better = match best {
                None => true,
                Some((c, ba, bb)) => {
                    let w_new = 100 + b - a;
                    let w_old = 100 + bb - ba;
                    correct > c || (correct == c && (w_new < w_old || (w_new == w_old && a < ba)))
                }
            };
            if better {
                best = Some((correct, a, b));
            }
        }
    }
    let (correct, a, b) = best.expect("grid is non-empty");
    Ok((
        ThresholdPair::from_grid(a, b),
        correct as f64 / validation.len() as f64,
    ))
}

/// Three-way accuracy of thresholded predictions.
pub fn three_way_accuracy(validation: &[(f64, Verdict)], t: ThresholdPair) -> f64 {
    if validation.is_empty() {
        return 0.0;
    }
    let hits = validation
        .iter()
        .filter(|(p, w)| predict_outcome(*p, t) == *w)
        .count();
    hits as f64 / validation.len() as f64
}

/// Where the BTL shift puts the validation scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BtlShift {
    /// `f = f_raw - min`, so every validation score is non-negative.
    #[default]
    MinToZero,
    /// `f = f_raw - max` as literally written in the original recipe; all
    /// scores become non-positive and BTL probabilities invert. Kept for
    /// reproduction studies only.
    SubtractMax,
}

/// Fitted normalization constants for one probability model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum ScorePreprocessor {
    Linear { delta: f64 },
    Btl { shift: f64, convention: BtlShift },
    BtlLogistic { gamma: f64 },
}

impl ScorePreprocessor {
    pub fn kind(&self) -> ProbabilityModelKind {
        match self {
            ScorePreprocessor::Linear { .. } => ProbabilityModelKind::Linear,
            ScorePreprocessor::Btl { .. } => ProbabilityModelKind::Btl,
            ScorePreprocessor::BtlLogistic { .. } => ProbabilityModelKind::BtlLogistic,
        }
    }

    pub fn btl_logistic(gamma: f64) -> Result<Self, ProbabilityError> {
        if (GAMMA_RANGE.0..=GAMMA_RANGE.1).contains(&gamma) {
            Ok(ScorePreprocessor::BtlLogistic { gamma })
        } else {
            Err(ProbabilityError::InvalidGamma(gamma))
        }
    }

    fn btl_convention(&self) -> Option<BtlShift> {
        match self {
            ScorePreprocessor::Btl { convention, .. } => Some(*convention),
            _ => None,
        }
    }

    /// A metric whose validation scores carry no pairwise signal.
    pub fn is_non_informative(&self) -> bool {
        matches!(self, ScorePreprocessor::Linear { delta } if *delta == 0.0)
    }

    pub fn apply(&self, raw: f64) -> f64 {
        match *self {
            ScorePreprocessor::Linear { delta } => {
                if delta == 0.0 {
                    0.0
                } else {
                    raw / (2.0 * delta)
                }
            }
            ScorePreprocessor::Btl { shift, .. } => raw - shift,
            ScorePreprocessor::BtlLogistic { gamma } => raw / gamma,
        }
    }
}

/// One validation example: raw scores of both texts and the human verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationPair {
    pub first: f64,
    pub second: f64,
    pub human: Verdict,
}

fn cross_entropy(p: f64, target: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

/// Temperature grid `0.005, 0.010, ..., 1.0`.
pub fn gamma_grid() -> impl Iterator<Item = f64> {
    let steps = ((GAMMA_RANGE.1 - GAMMA_RANGE.0) / GAMMA_STEP).round() as usize;
    (0..=steps).map(|s| (((s as f64) * GAMMA_STEP + GAMMA_RANGE.0) * 1000.0).round() / 1000.0)
}

/// Fits the preprocessing constants of `model` on validation data.
pub fn fit_preprocessor(
    model: ProbabilityModelKind,
    validation: &[ValidationPair],
    btl_shift: BtlShift,
) -> Result<ScorePreprocessor, ProbabilityError> {
    if validation.is_empty() {
        return Err(ProbabilityError::EmptyValidation);
    }
    Ok(match model {
        ProbabilityModelKind::Linear => {
            let delta = validation
                .iter()
                .map(|v| (v.first - v.second).abs())
                .fold(0.0, f64::max);
            if delta == 0.0 {
                log::warn!("metric is constant on the validation set; marked non-informative");
            }
            ScorePreprocessor::Linear { delta }
        }
        ProbabilityModelKind::Btl => {
            let scores = validation.iter().flat_map(|v| [v.first, v.second]);
            let shift = match btl_shift {
                BtlShift::MinToZero => scores.fold(f64::INFINITY, f64::min),
                BtlShift::SubtractMax => scores.fold(f64::NEG_INFINITY, f64::max),
            };
            ScorePreprocessor::Btl { shift, convention: btl_shift }
        }
        ProbabilityModelKind::BtlLogistic => {
            let mut best = (f64::INFINITY, GAMMA_RANGE.1);
            for gamma in gamma_grid() {
                let loss: f64 = validation
                    .iter()
                    .map(|v| cross_entropy(sigmoid((v.first - v.second) / gamma), v.human.value()))
                    .sum();
                if loss < best.0 {
                    best = (loss, gamma);
                }
            }
            ScorePreprocessor::BtlLogistic { gamma: best.1 }
        }
    })
}

/// A probability model with its fitted preprocessing and thresholds.
///
/// Linear probabilities on unseen pairs can leave `[0, 1]` when the score gap
/// exceeds the fitted `delta`; they are clamped and counted.
#[derive(Debug, Serialize, Deserialize)]
pub struct FittedModel {
    pub preprocessor: ScorePreprocessor,
    pub thresholds: ThresholdPair,
    #[serde(skip)]
    clamped: AtomicU64,
}

impl Clone for FittedModel {
    fn clone(&self) -> Self {
        FittedModel {
            preprocessor: self.preprocessor.clone(),
            thresholds: self.thresholds,
            clamped: AtomicU64::new(self.clamped_count()),
        }
    }
}

impl PartialEq for FittedModel {
    fn eq(&self, other: &Self) -> bool {
        self.preprocessor == other.preprocessor && self.thresholds == other.thresholds
    }
}

impl FittedModel {
    pub fn new(preprocessor: ScorePreprocessor, thresholds: ThresholdPair) -> Self {
        FittedModel {
            preprocessor,
            thresholds,
            clamped: AtomicU64::new(0),
        }
    }

    pub fn kind(&self) -> ProbabilityModelKind {
        self.preprocessor.kind()
    }

    /// Probability from raw metric scores. Degenerate BTL input yields 1/2.
    pub fn probability(&self, raw1: f64, raw2: f64) -> f64 {
        let f1 = self.preprocessor.apply(raw1);
        let f2 = self.preprocessor.apply(raw2);
        let kind = self.kind();
        let p = match kind {
            ProbabilityModelKind::Btl if self.preprocessor.btl_convention() == Some(BtlShift::SubtractMax) => {
                let denom = f1 + f2;
                if denom == 0.0 { 0.5 } else { f1 / denom }
            }
            ProbabilityModelKind::Btl => {
                // Unseen scores below the fitted minimum are floored at zero.
                match preference_probability(kind, f1.max(0.0), f2.max(0.0)) {
                    Ok(p) => p,
                    Err(_) => {
                        log::debug!("degenerate BTL input ({raw1}, {raw2}); returning 0.5");
                        0.5
                    }
                }
            }
            _ => preference_probability(kind, f1, f2).expect("linear and logistic are total"),
        };
        if !(0.0..=1.0).contains(&p) {
            self.clamped.fetch_add(1, Ordering::Relaxed);
            p.clamp(0.0, 1.0)
        } else {
            p
        }
    }

    pub fn predict(&self, p: f64) -> Verdict {
        predict_outcome(p, self.thresholds)
    }

    /// Number of probabilities clamped into `[0, 1]` so far.
    pub fn clamped_count(&self) -> u64 {
        self.clamped.load(Ordering::Relaxed)
    }
}

/// One line of a calibration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub metric: String,
    pub preprocessor: ScorePreprocessor,
    pub tau1: f64,
    pub tau2: f64,
    pub validation_accuracy: f64,
    #[serde(default)]
    pub non_informative: bool,
}

impl CalibrationRecord {
    pub fn fitted(&self) -> FittedModel {
        FittedModel::new(
            self.preprocessor.clone(),
            ThresholdPair { tau1: self.tau1, tau2: self.tau2 },
        )
    }
}

/// Fits preprocessing and thresholds for one metric.
pub fn calibrate(
    metric: &str,
    model: ProbabilityModelKind,
    validation: &[ValidationPair],
    btl_shift: BtlShift,
) -> Result<CalibrationRecord, ProbabilityError> {
    let preprocessor = fit_preprocessor(model, validation, btl_shift)?;
    let fitted = FittedModel::new(preprocessor.clone(), ThresholdPair::default());
    let probs: Vec<(f64, Verdict)> = validation
        .iter()
        .map(|v| (fitted.probability(v.first, v.second), v.human))
        .collect();
    let (t, acc) = calibrate_thresholds(&probs)?;
    Ok(CalibrationRecord {
        metric: metric.to_string(),
        non_informative: preprocessor.is_non_informative(),
        preprocessor,
        tau1: t.tau1,
        tau2: t.tau2,
        validation_accuracy: acc,
    })
}
