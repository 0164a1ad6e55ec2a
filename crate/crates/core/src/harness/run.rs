use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ComplexityConfig, HarnessError, RunTrace};
use crate::environment::{Annotator, DelayedFeedback, PreferenceSource};
use crate::learners::AlgorithmSpec;
use crate::model_based::{ComposedLearner, FeedbackPolicy, Predictor, Responder};
use crate::preference::{ComparisonOutcome, Source};

/// Everything that defines one configuration being measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSetup {
    pub spec: AlgorithmSpec,
    #[serde(default)]
    pub policy: FeedbackPolicy,
    /// Systems kept by up-front elimination; `None` keeps all.
    #[serde(default)]
    pub survivors: Option<Vec<usize>>,
    /// Feedback delay in selections.
    #[serde(default)]
    pub delay: usize,
}

impl RunSetup {
    pub fn new(spec: impl Into<AlgorithmSpec>) -> Self {
        RunSetup { spec: spec.into(), policy: FeedbackPolicy::HumanOnly, survivors: None, delay: 0 }
    }

    pub fn with_policy(mut self, policy: FeedbackPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_survivors(mut self, survivors: Vec<usize>) -> Self {
        self.survivors = Some(survivors);
        self
    }

    pub fn with_delay(mut self, delay: usize) -> Self {
        self.delay = delay;
        self
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for `(master, run, index)`.
pub fn derive_seed(master: u64, run: u64, index: u64) -> u64 {
    splitmix(master ^ splitmix(run.wrapping_add(splitmix(index))))
}

/// One seeded run.
///
/// The learner, the annotator and the feedback policy each get their own
/// stream derived from `seed`. The recommendation for checkpoint `n` is taken
/// right before the `(n + 1)`-th human annotation is revealed; once the
/// learner terminates (or the feedback cap is hit) its final recommendation
/// fills the remaining checkpoints.
pub fn simulate(
    source: &dyn PreferenceSource,
    predictor: Option<&dyn Predictor>,
    setup: &RunSetup,
    cfg: &ComplexityConfig,
    seed: u64,
) -> Result<RunTrace, HarnessError> {
    let k = source.k();
    let mut learner = ComposedLearner::new(
        setup.spec.clone(),
        k,
        derive_seed(seed, 0, 0),
        setup.survivors.as_deref(),
        setup.policy,
    )?;
    if setup.policy.uses_metric() && predictor.is_none() {
        return Err(HarnessError::Config("feedback policy needs a metric predictor".into()));
    }
    let mut annotator = Annotator::new(source, derive_seed(seed, 0, 1));
    let mut policy_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 2));
    let mut queue: DelayedFeedback<ComparisonOutcome> = DelayedFeedback::new(setup.delay);
    let checkpoints = cfg.checkpoints();
    let stride = cfg.checkpoint_stride;
    let mut recs = Vec::with_capacity(checkpoints);
    let (mut humans, mut model, mut steps) = (0u64, 0u64, 0u64);

    while recs.len() < checkpoints && steps < cfg.max_feedback && !learner.is_terminated() {
        let (a, b) = learner.select_pair()?;
        let draw = annotator.draw(a, b)?;
        let prediction = match (setup.policy.uses_metric(), predictor) {
            (true, Some(p)) => Some(p.predict(a.0, b.0, draw.example, &mut policy_rng)?),
            _ => None,
        };
        let outcome = match setup.policy.decide(prediction.as_ref(), &mut policy_rng)? {
            Responder::Human => {
                if humans % stride == 0 {
                    recs.push(learner.recommend());
                    if recs.len() == checkpoints {
                        break;
                    }
                }
                humans += 1;
                annotator.reveal(draw)
            }
            Responder::Model => {
                model += 1;
                let p = prediction.expect("model responder implies a prediction");
                ComparisonOutcome::new(a, b, p.predicted, Source::Model, source.example_name(draw.example))
            }
        };
        steps += 1;
        if let Some(o) = queue.push(outcome) {
            learner.update(&o)?;
        }
    }
    let terminal = learner.recommend();
    recs.resize(checkpoints, terminal);
    Ok(RunTrace {
        seed,
        stride,
        recommendations: recs,
        terminal,
        human_annotations: humans,
        model_feedback: model,
    })
}

/// `cfg.seeds` runs in parallel; run `i` uses `derive_seed(master, run_id, i)`.
/// Output order and content do not depend on the worker count.
pub fn run_seeds(
    source: &dyn PreferenceSource,
    predictor: Option<&dyn Predictor>,
    setup: &RunSetup,
    cfg: &ComplexityConfig,
    master: u64,
    run_id: u64,
) -> Result<Vec<RunTrace>, HarnessError> {
    cfg.validate()?;
    (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|i| simulate(source, predictor, setup, cfg, derive_seed(master, run_id, i)))
        .collect()
}
