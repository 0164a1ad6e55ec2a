//! Model-based feedback: letting an automatic metric answer some of the
//! comparisons, and pruning systems from metric scores before any human is
//! asked.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::ScoredInstance;
use crate::learners::{AlgorithmSpec, LearnerError, LearnerState};
use crate::metric::{predict_pair, MetricError, MetricScoreTable, PairwisePrediction};
use crate::preference::{ComparisonOutcome, Source, SystemId, Verdict};
use crate::probability::FittedModel;

#[derive(Debug, Error)]
pub enum ModelBasedError {
    #[error("empty sample list")]
    EmptySamples,
    #[error("probability sample {0} outside [0, 1]")]
    InvalidSample(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("uncertainty gating needs per-sample predictions, got none")]
    MissingSamples,
    #[error("no examples for pair ({0}, {1})")]
    EmptyPair(usize, usize),
    #[error("system {0} was eliminated before annotation")]
    Eliminated(SystemId),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyBase {
    Nat,
    Bit,
}

fn binary_entropy(p: f64) -> f64 {
    let h = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.ln() };
    h(p) + h(1.0 - p)
}

fn check_samples(samples: &[f64]) -> Result<(), ModelBasedError> {
    if samples.is_empty() {
        return Err(ModelBasedError::EmptySamples);
    }
    if let Some(&p) = samples.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(ModelBasedError::InvalidSample(p));
    }
    Ok(())
}

/// Mutual information between the prediction and the sampled model:
/// `H(mean p) - mean H(p_l)`.
pub fn bald_score(samples: &[f64], base: EntropyBase) -> Result<f64, ModelBasedError> {
    check_samples(samples)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let expected = samples.iter().map(|&p| binary_entropy(p)).sum::<f64>() / n;
    // Rounding can leave a tiny negative value when all samples agree.
    let nats = (binary_entropy(mean) - expected).max(0.0);
    Ok(match base {
        EntropyBase::Nat => nats,
        EntropyBase::Bit => nats / std::f64::consts::LN_2,
    })
}

/// Population standard deviation of the sampled probabilities.
pub fn std_score(samples: &[f64]) -> Result<f64, ModelBasedError> {
    check_samples(samples)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    Ok((samples.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomMixingConfig {
    /// Probability of answering with the metric.
    pub p_m: f64,
}

impl RandomMixingConfig {
    pub fn new(p_m: f64) -> Result<Self, ModelBasedError> {
        if (0.0..=1.0).contains(&p_m) {
            Ok(RandomMixingConfig { p_m })
        } else {
            Err(ModelBasedError::Config(format!("p_m = {p_m} outside [0, 1]")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum UncertaintyMeasure {
    Bald,
    Std,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyConfig {
    pub measure: UncertaintyMeasure,
    /// Humans are asked when the measure exceeds this value (BALD in nats).
    pub threshold: f64,
}

impl UncertaintyConfig {
    pub fn new(measure: UncertaintyMeasure, threshold: f64) -> Result<Self, ModelBasedError> {
        let max = match measure {
            UncertaintyMeasure::Bald => std::f64::consts::LN_2,
            UncertaintyMeasure::Std => 0.5,
        };
        if !(0.0..=max).contains(&threshold) {
            return Err(ModelBasedError::Config(format!(
                "{measure:?} threshold {threshold} outside [0, {max}]"
            )));
        }
        Ok(UncertaintyConfig { measure, threshold })
    }

    pub fn score(&self, prediction: &PairwisePrediction) -> Result<f64, ModelBasedError> {
        if prediction.samples.len() < 2 {
            return Err(ModelBasedError::MissingSamples);
        }
        match self.measure {
            UncertaintyMeasure::Bald => bald_score(&prediction.samples, EntropyBase::Nat),
            UncertaintyMeasure::Std => std_score(&prediction.samples),
        }
    }
}

/// Who answers each comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum FeedbackPolicy {
    #[default]
    HumanOnly,
    RandomMixing(RandomMixingConfig),
    UncertaintyGated(UncertaintyConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Responder {
    Model,
    Human,
}

impl FeedbackPolicy {
    /// Whether the policy ever consults the metric.
    pub fn uses_metric(&self) -> bool {
        !matches!(self, FeedbackPolicy::HumanOnly)
    }

    /// Decides who answers. Random mixing draws one coin per call; the
    /// other policies consume no randomness.
    pub fn decide(
        &self,
        prediction: Option<&PairwisePrediction>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Responder, ModelBasedError> {
        Ok(match self {
            FeedbackPolicy::HumanOnly => Responder::Human,
            FeedbackPolicy::RandomMixing(cfg) => {
                if rng.random_bool(cfg.p_m) {
                    Responder::Model
                } else {
                    Responder::Human
                }
            }
            FeedbackPolicy::UncertaintyGated(cfg) => {
                let p = prediction.ok_or(ModelBasedError::MissingSamples)?;
                if cfg.score(p)? > cfg.threshold {
                    Responder::Human
                } else {
                    Responder::Model
                }
            }
        })
    }
}

fn model_outcome(p: &PairwisePrediction, first: SystemId, second: SystemId, example: &str) -> ComparisonOutcome {
    ComparisonOutcome::new(first, second, p.predicted, Source::Model, example)
}

/// With probability `p_m` the metric's predicted outcome, otherwise the
/// human's; `human` is only invoked on the human branch.
pub fn random_mixing_feedback<E>(
    cfg: RandomMixingConfig,
    prediction: &PairwisePrediction,
    (first, second, example): (SystemId, SystemId, &str),
    human: impl FnOnce() -> Result<ComparisonOutcome, E>,
    rng: &mut ChaCha8Rng,
) -> Result<ComparisonOutcome, E> {
    if rng.random_bool(cfg.p_m) {
        Ok(model_outcome(prediction, first, second, example))
    } else {
        human()
    }
}

/// The human's outcome when the metric is uncertain, otherwise the metric's.
pub fn uncertainty_gated_feedback<E: From<ModelBasedError>>(
    cfg: UncertaintyConfig,
    prediction: &PairwisePrediction,
    (first, second, example): (SystemId, SystemId, &str),
    human: impl FnOnce() -> Result<ComparisonOutcome, E>,
) -> Result<ComparisonOutcome, E> {
    if cfg.score(prediction)? > cfg.threshold {
        human()
    } else {
        Ok(model_outcome(prediction, first, second, example))
    }
}

/// Threshold at which roughly a fraction `human_fraction` of `scores` exceed
/// it (the `(1 - human_fraction)` quantile).
pub fn threshold_for_human_fraction(scores: &[f64], human_fraction: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = ((1.0 - human_fraction.clamp(0.0, 1.0)) * sorted.len() as f64).round() as usize;
    if m == 0 {
        0.0
    } else {
        sorted[m - 1]
    }
}

/// Mixing probability suggested by a metric's three-way accuracy: 0.8 from
/// 70% up, 0.5 to 0.7 across 65-70%, and no mixing below.
pub fn p_m_for_accuracy(accuracy: f64) -> f64 {
    if accuracy >= 0.70 {
        0.8
    } else if accuracy >= 0.65 {
        0.5 + (accuracy - 0.65) / 0.05 * 0.2
    } else {
        0.0
    }
}

/// Something that predicts the outcome of `a` versus `b` on an example.
pub trait Predictor: Send + Sync {
    fn predict(
        &self,
        a: usize,
        b: usize,
        example: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<PairwisePrediction, ModelBasedError>;
}

/// Predictions from a metric score table and a fitted probability model.
/// System and example indices are the table's.
pub struct TablePredictor<'a> {
    pub table: &'a MetricScoreTable,
    pub model: &'a FittedModel,
}

impl Predictor for TablePredictor<'_> {
    fn predict(&self, a: usize, b: usize, e: usize, _rng: &mut ChaCha8Rng) -> Result<PairwisePrediction, ModelBasedError> {
        Ok(predict_pair(self.table, self.model, a, b, e)?)
    }
}

/// A perfectly accurate metric: always the most likely human verdict.
pub struct ModalPredictor<'a>(pub &'a ScoredInstance);

impl Predictor for ModalPredictor<'_> {
    fn predict(&self, a: usize, b: usize, e: usize, _rng: &mut ChaCha8Rng) -> Result<PairwisePrediction, ModelBasedError> {
        let v = self.0.modal(a, b, e);
        Ok(PairwisePrediction { mean: v.value(), samples: Vec::new(), predicted: v })
    }
}

/// An uninformative metric: a uniformly random verdict.
pub struct RandomPredictor;

impl Predictor for RandomPredictor {
    fn predict(&self, _a: usize, _b: usize, _e: usize, rng: &mut ChaCha8Rng) -> Result<PairwisePrediction, ModelBasedError> {
        let v = [Verdict::Loss, Verdict::Tie, Verdict::Win][rng.random_range(0..3)];
        Ok(PairwisePrediction { mean: v.value(), samples: Vec::new(), predicted: v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcbEliminationConfig {
    pub alpha: f64,
    pub copeland_threshold: f64,
}

impl Default for UcbEliminationConfig {
    fn default() -> Self {
        UcbEliminationConfig { alpha: 0.6, copeland_threshold: 0.8 }
    }
}

impl UcbEliminationConfig {
    pub fn validate(&self) -> Result<(), ModelBasedError> {
        if !(self.alpha >= 0.0) || !(self.copeland_threshold > 0.0 && self.copeland_threshold <= 1.0) {
            return Err(ModelBasedError::Config(format!(
                "need alpha >= 0 and copeland threshold in (0, 1], got {} and {}",
                self.alpha, self.copeland_threshold
            )));
        }
        Ok(())
    }
}

/// Metric-based estimate for one ordered pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub i: usize,
    pub j: usize,
    pub p_hat: f64,
    pub sigma: f64,
    pub upper: f64,
}

/// Audit trail of one elimination pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationReport {
    pub systems: Vec<String>,
    /// Every ordered pair `i != j`.
    pub pairs: Vec<PairEstimate>,
    /// Optimistic Copeland score per system.
    pub optimistic_copeland: Vec<f64>,
    pub survivors: Vec<usize>,
}

impl EliminationReport {
    pub fn survived(&self, i: usize) -> bool {
        self.survivors.contains(&i)
    }

    /// One row per ordered pair plus the row system's Copeland score and flag.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("system,opponent,p_hat,sigma,upper,optimistic_copeland,survived\n");
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{}",
                self.systems[p.i],
                self.systems[p.j],
                p.p_hat,
                p.sigma,
                p.upper,
                self.optimistic_copeland[p.i],
                self.survived(p.i)
            );
        }
        out
    }
}

/// One-shot pruning from metric scores.
///
/// For each pair the preference estimate is the mean over examples of the
/// mean sampled probability, with `sigma^2 = (1/N^2) sum_e Var_l(p_l)`. System
/// `i` keeps its place when the share of opponents with
/// `p_hat_ij + alpha sigma_ij > 1/2` reaches the Copeland threshold. If no
/// system qualifies, those with the highest optimistic score are kept.
pub fn ucb_eliminate(
    table: &MetricScoreTable,
    model: &FittedModel,
    cfg: UcbEliminationConfig,
    examples: impl Fn(usize, usize) -> Vec<usize>,
) -> Result<EliminationReport, ModelBasedError> {
    cfg.validate()?;
    if table.sample_count().is_none() {
        return Err(ModelBasedError::MissingSamples);
    }
    let k = table.systems().len();
    let mut p_hat = vec![0.5; k * k];
    let mut sigma = vec![0.0; k * k];
    for i in 0..k {
        for j in (i + 1)..k {
            let d = examples(i, j);
            if d.is_empty() {
                return Err(ModelBasedError::EmptyPair(i, j));
            }
            let (mut mean_sum, mut var_sum) = (0.0, 0.0);
            for &e in &d {
                let pred = predict_pair(table, model, i, j, e)?;
                let l = pred.samples.len() as f64;
                let var = pred.samples.iter().map(|p| (p - pred.mean).powi(2)).sum::<f64>() / l;
                mean_sum += pred.mean;
                var_sum += var;
            }
            let n = d.len() as f64;
            p_hat[i * k + j] = mean_sum / n;
            p_hat[j * k + i] = 1.0 - mean_sum / n;
            let s = var_sum.sqrt() / n;
            sigma[i * k + j] = s;
            sigma[j * k + i] = s;
        }
    }
    let mut pairs = Vec::with_capacity(k * (k - 1));
    let mut optimistic = vec![0.0; k];
    for i in 0..k {
        let mut wins = 0usize;
        for j in (0..k).filter(|&j| j != i) {
            let upper = p_hat[i * k + j] + cfg.alpha * sigma[i * k + j];
            if upper > 0.5 {
                wins += 1;
            }
            pairs.push(PairEstimate { i, j, p_hat: p_hat[i * k + j], sigma: sigma[i * k + j], upper });
        }
        optimistic[i] = wins as f64 / (k - 1) as f64;
    }
    let mut survivors: Vec<usize> = (0..k).filter(|&i| optimistic[i] >= cfg.copeland_threshold).collect();
    if survivors.is_empty() {
        let best = optimistic.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        survivors = (0..k).filter(|&i| optimistic[i] == best).collect();
    }
    Ok(EliminationReport {
        systems: table.systems().to_vec(),
        pairs,
        optimistic_copeland: optimistic,
        survivors,
    })
}

/// A learner restricted to the systems that survived elimination, speaking
/// original system ids on the outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposedLearner {
    /// Inner index -> original id.
    map: Vec<SystemId>,
    inner: Option<LearnerState>,
    policy: FeedbackPolicy,
}

impl ComposedLearner {
    /// `survivors = None` runs the learner over all `k` systems.
    pub fn new(
        spec: AlgorithmSpec,
        k: usize,
        seed: u64,
        survivors: Option<&[usize]>,
        policy: FeedbackPolicy,
    ) -> Result<Self, ModelBasedError> {
        let map: Vec<SystemId> = match survivors {
            Some(s) => {
                if s.is_empty() || s.iter().any(|&i| i >= k) {
                    return Err(ModelBasedError::Config(format!("invalid survivor set {s:?} for k = {k}")));
                }
                s.iter().copied().map(SystemId).collect()
            }
            None => (0..k).map(SystemId).collect(),
        };
        let inner = if map.len() >= 2 {
            Some(LearnerState::new(spec, map.len(), seed)?)
        } else {
            spec.validate()?;
            None
        };
        Ok(ComposedLearner { map, inner, policy })
    }

    pub fn policy(&self) -> &FeedbackPolicy {
        &self.policy
    }

    pub fn inner(&self) -> Option<&LearnerState> {
        self.inner.as_ref()
    }

    pub fn systems(&self) -> &[SystemId] {
        &self.map
    }

    /// Finished before asking anything (single survivor) or terminated.
    pub fn is_terminated(&self) -> bool {
        self.inner.as_ref().is_none_or(|l| l.is_terminated())
    }

    pub fn select_pair(&mut self) -> Result<(SystemId, SystemId), ModelBasedError> {
        match self.inner.as_mut() {
            Some(l) => {
                let (a, b) = l.select_pair()?;
                Ok((self.map[a.0], self.map[b.0]))
            }
            None => Err(LearnerError::Terminated { winner: self.map[0] }.into()),
        }
    }

    fn local(&self, s: SystemId) -> Result<SystemId, ModelBasedError> {
        self.map
            .iter()
            .position(|&m| m == s)
            .map(SystemId)
            .ok_or(ModelBasedError::Eliminated(s))
    }

    pub fn update(&mut self, outcome: &ComparisonOutcome) -> Result<(), ModelBasedError> {
        let a = self.local(outcome.first)?;
        let b = self.local(outcome.second)?;
        if let Some(l) = self.inner.as_mut() {
            l.apply(a, b, outcome.verdict)?;
        }
        Ok(())
    }

    pub fn recommend(&self) -> SystemId {
        match &self.inner {
            Some(l) => self.map[l.recommend().0],
            None => self.map[0],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Algorithm;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn bald_examples() {
        assert_abs_diff_eq!(bald_score(&[0.9, 0.9], EntropyBase::Nat).unwrap(), 0.0, epsilon = 1e-15);
        let h2 = |p: f64| -(p * p.log2() + (1.0 - p) * (1.0 - p).log2());
        assert_abs_diff_eq!(bald_score(&[0.1, 0.9], EntropyBase::Bit).unwrap(), 1.0 - h2(0.1), epsilon = 1e-12);
        assert_abs_diff_eq!(bald_score(&[0.0, 1.0], EntropyBase::Bit).unwrap(), 1.0, epsilon = 1e-12);
        assert!(bald_score(&[], EntropyBase::Nat).is_err());
    }

    #[test]
    fn std_examples() {
        assert_eq!(std_score(&[0.5, 0.5]).unwrap(), 0.0);
        assert_abs_diff_eq!(std_score(&[0.1, 0.9]).unwrap(), 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(std_score(&[0.2, 0.4, 0.6, 0.8]).unwrap(), 0.05f64.sqrt(), epsilon = 1e-12);
    }

    fn pred(samples: Vec<f64>, v: Verdict) -> PairwisePrediction {
        let mean = samples.iter().sum::<f64>() / samples.len().max(1) as f64;
        PairwisePrediction { mean, samples, predicted: v }
    }

    #[test]
    fn random_mixing_extremes_and_rate() {
        let p = pred(vec![], Verdict::Win);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ctx = (SystemId(0), SystemId(1), "x");
        let human = || Ok::<_, ()>(ComparisonOutcome::new(SystemId(0), SystemId(1), Verdict::Loss, Source::Human, "x"));
        for _ in 0..100 {
            let o = random_mixing_feedback(RandomMixingConfig::new(0.0).unwrap(), &p, ctx, human, &mut rng).unwrap();
            assert_eq!(o.source, Source::Human);
            let o = random_mixing_feedback(RandomMixingConfig::new(1.0).unwrap(), &p, ctx, || -> Result<_, ()> { panic!("human asked") }, &mut rng).unwrap();
            assert_eq!(o.source, Source::Model);
        }
        let cfg = RandomMixingConfig::new(0.8).unwrap();
        let n = 100_000;
        let model = (0..n)
            .filter(|_| random_mixing_feedback(cfg, &p, ctx, human, &mut rng).unwrap().source == Source::Model)
            .count();
        assert!((model as f64 / n as f64 - 0.8).abs() < 0.01);
        assert!(RandomMixingConfig::new(1.2).is_err());
    }

    #[test]
    fn gating_boundaries() {
        let ctx = (SystemId(0), SystemId(1), "x");
        let human = || Ok::<_, ModelBasedError>(ComparisonOutcome::new(SystemId(0), SystemId(1), Verdict::Loss, Source::Human, "x"));
        let cfg = UncertaintyConfig::new(UncertaintyMeasure::Bald, 0.0).unwrap();
        let o = uncertainty_gated_feedback(cfg, &pred(vec![0.4, 0.6], Verdict::Tie), ctx, human).unwrap();
        assert_eq!(o.source, Source::Human);
        let o = uncertainty_gated_feedback(cfg, &pred(vec![0.6, 0.6], Verdict::Win), ctx, human).unwrap();
        assert_eq!(o.source, Source::Model);
        assert_eq!(o.verdict, Verdict::Win);
        assert!(matches!(
            uncertainty_gated_feedback(cfg, &pred(vec![], Verdict::Win), ctx, human),
            Err(ModelBasedError::MissingSamples)
        ));
        assert!(UncertaintyConfig::new(UncertaintyMeasure::Bald, 0.8).is_err());
    }

    #[test]
    fn quantile_threshold_sets_human_fraction() {
        let scores: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let t = threshold_for_human_fraction(&scores, 0.3);
        let frac = scores.iter().filter(|&&s| s > t).count() as f64 / 1000.0;
        assert!((frac - 0.3).abs() < 0.002);
    }

    #[test]
    fn p_m_bands() {
        assert_eq!(p_m_for_accuracy(0.85), 0.8);
        assert_abs_diff_eq!(p_m_for_accuracy(0.675), 0.6, epsilon = 1e-12);
        assert_eq!(p_m_for_accuracy(0.5), 0.0);
    }

    #[test]
    fn single_survivor_short_circuits() {
        let c = ComposedLearner::new(Algorithm::Rmed.into(), 5, 0, Some(&[3]), FeedbackPolicy::HumanOnly).unwrap();
        assert!(c.is_terminated());
        assert_eq!(c.recommend(), SystemId(3));
    }

    #[test]
    fn human_only_composition_matches_plain_learner() {
        let mut plain = LearnerState::new(Algorithm::Dts.into(), 4, 5).unwrap();
        let mut comp = ComposedLearner::new(Algorithm::Dts.into(), 4, 5, None, FeedbackPolicy::HumanOnly).unwrap();
        for t in 0..200 {
            let p = plain.select_pair().unwrap();
            assert_eq!(comp.select_pair().unwrap(), p);
            let v = if t % 3 == 0 { Verdict::Tie } else if p.0 < p.1 { Verdict::Win } else { Verdict::Loss };
            plain.apply(p.0, p.1, v).unwrap();
            comp.update(&ComparisonOutcome::new(p.0, p.1, v, Source::Human, "x")).unwrap();
        }
        assert_eq!(comp.inner().unwrap(), &plain);
    }

    #[test]
    fn remapped_ids() {
        let mut c = ComposedLearner::new(Algorithm::Uniform.into(), 6, 1, Some(&[1, 4]), FeedbackPolicy::HumanOnly).unwrap();
        let (a, b) = c.select_pair().unwrap();
        assert!([a, b].contains(&SystemId(1)) && [a, b].contains(&SystemId(4)));
        c.update(&ComparisonOutcome::new(SystemId(4), SystemId(1), Verdict::Win, Source::Human, "x")).unwrap();
        assert_eq!(c.recommend(), SystemId(4));
        assert!(matches!(
            c.update(&ComparisonOutcome::new(SystemId(0), SystemId(1), Verdict::Win, Source::Human, "x")),
            Err(ModelBasedError::Eliminated(SystemId(0)))
        ));
    }
}
