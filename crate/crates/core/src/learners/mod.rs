//! Dueling-bandit learners behind a single select / update / recommend
//! contract.
//!
//! A [`LearnerState`] owns the win counts of every applied outcome, the
//! variant's own bookkeeping and a seeded generator, so a run is fully
//! reproducible from `(spec, k, seed, outcome sequence)`. Outcomes may arrive
//! late: `select` can be called several times before the matching `update`s,
//! and the state only ever reads outcomes that were actually applied.
//!
//! Variants that do not declare a winner on their own are read out with the
//! empirical Copeland winner of the counts (lowest index on ties).

mod beat_the_mean;
mod ccb;
mod dts;
mod interleaved_filter;
mod plackett_luce;
mod rcs;
mod rmed;
mod rucb;
mod savage;
pub(crate) mod stats;
mod tournament;
mod uniform;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preference::{
    copeland_winner, ComparisonOutcome, PreferenceError, SystemId, Verdict, WinCountMatrix,
};

pub use beat_the_mean::BeatTheMean;
pub use ccb::Ccb;
pub use dts::Dts;
pub use interleaved_filter::InterleavedFilter;
pub use plackett_luce::PlackettLuce;
pub use rcs::Rcs;
pub use rmed::Rmed;
pub use rucb::Rucb;
pub use savage::Savage;
pub use tournament::{Duel, Knockout, SequentialElimination, SingleElimination};
pub use uniform::Uniform;

/// Version tag written into every serialized learner snapshot.
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("invalid hyperparameter {name} = {value} for {algorithm}: {reason}")]
    InvalidHyperparameter {
        algorithm: Algorithm,
        name: String,
        value: f64,
        reason: String,
    },
    #[error("unknown hyperparameter {name:?} for {algorithm}")]
    UnknownHyperparameter { algorithm: Algorithm, name: String },
    #[error("need at least 2 systems, got {0}")]
    TooFewSystems(usize),
    #[error("learner has terminated with winner {winner}")]
    Terminated { winner: SystemId },
    #[error(transparent)]
    Outcome(#[from] PreferenceError),
    #[error("snapshot version {found} is not supported (expected {SNAPSHOT_VERSION})")]
    SnapshotVersion { found: u32 },
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

/// The learner families available for pair selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    Uniform,
    #[serde(rename = "IF")]
    InterleavedFilter,
    #[serde(rename = "BTM")]
    BeatTheMean,
    SequentialElimination,
    PlackettLuce,
    Knockout,
    SingleElimination,
    #[serde(rename = "RUCB")]
    Rucb,
    #[serde(rename = "RCS")]
    Rcs,
    #[serde(rename = "RMED")]
    Rmed,
    #[serde(rename = "SAVAGE")]
    Savage,
    #[serde(rename = "CCB")]
    Ccb,
    #[serde(rename = "DTS")]
    Dts,
    #[serde(rename = "DTS++")]
    DtsPlusPlus,
}

impl Algorithm {
    pub const ALL: [Algorithm; 14] = [
        Algorithm::Uniform,
        Algorithm::InterleavedFilter,
        Algorithm::BeatTheMean,
        Algorithm::SequentialElimination,
        Algorithm::PlackettLuce,
        Algorithm::Knockout,
        Algorithm::SingleElimination,
        Algorithm::Rucb,
        Algorithm::Rcs,
        Algorithm::Rmed,
        Algorithm::Savage,
        Algorithm::Ccb,
        Algorithm::Dts,
        Algorithm::DtsPlusPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Uniform => "Uniform",
            Algorithm::InterleavedFilter => "IF",
            Algorithm::BeatTheMean => "BTM",
            Algorithm::SequentialElimination => "SequentialElimination",
            Algorithm::PlackettLuce => "PlackettLuce",
            Algorithm::Knockout => "Knockout",
            Algorithm::SingleElimination => "SingleElimination",
            Algorithm::Rucb => "RUCB",
            Algorithm::Rcs => "RCS",
            Algorithm::Rmed => "RMED",
            Algorithm::Savage => "SAVAGE",
            Algorithm::Ccb => "CCB",
            Algorithm::Dts => "DTS",
            Algorithm::DtsPlusPlus => "DTS++",
        }
    }

    /// Default hyperparameters and the accepted range of each.
    fn defaults(self) -> &'static [(&'static str, f64, f64, f64)] {
        // (name, default, min, max)
        match self {
            Algorithm::Uniform => &[],
            Algorithm::InterleavedFilter => &[("horizon", 1e6, 1.0, f64::INFINITY)],
            Algorithm::BeatTheMean => &[
                ("horizon", 1e6, 1.0, f64::INFINITY),
                ("gamma", 1.0, 1.0, f64::INFINITY),
            ],
            Algorithm::SequentialElimination => {
                &[("epsilon", 0.05, 1e-6, 0.5), ("delta", 0.05, 1e-12, 1.0)]
            }
            Algorithm::PlackettLuce => &[("delta", 0.05, 1e-12, 1.0)],
            Algorithm::Knockout => &[
                ("epsilon", 0.2, 1e-6, 0.5),
                ("delta", 0.05, 1e-12, 1.0),
                ("gamma", 0.6, 1e-6, 1.0),
            ],
            Algorithm::SingleElimination => &[("m", 500.0, 1.0, 1e9)],
            Algorithm::Rucb => &[("alpha", 0.51, 0.5, f64::INFINITY)],
            Algorithm::Rcs => &[("alpha", 0.501, 0.5, f64::INFINITY)],
            Algorithm::Rmed => &[("f_scale", 0.3, 0.0, f64::INFINITY), ("f_exponent", 1.01, 0.0, 10.0)],
            Algorithm::Savage => &[("delta", 0.05, 1e-12, 1.0)],
            Algorithm::Ccb => &[("alpha", 0.51, 0.5, f64::INFINITY)],
            Algorithm::Dts | Algorithm::DtsPlusPlus => &[("alpha", 0.51, 0.5, f64::INFINITY)],
        }
    }

    /// Whether the variant removes systems or pairs from consideration.
    pub fn is_elimination(self) -> bool {
        matches!(
            self,
            Algorithm::InterleavedFilter
                | Algorithm::BeatTheMean
                | Algorithm::SequentialElimination
                | Algorithm::PlackettLuce
                | Algorithm::Knockout
                | Algorithm::SingleElimination
                | Algorithm::Savage
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = LearnerError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric() || *c == '+')
            .collect::<String>()
            .to_ascii_lowercase();
        Algorithm::ALL
            .into_iter()
            .find(|a| {
                let name: String = a
                    .name()
                    .chars()
                    .filter(|c| c.is_ascii_alphanumeric() || *c == '+')
                    .collect::<String>()
                    .to_ascii_lowercase();
                name == norm
            })
            .or(match norm.as_str() {
                "interleavedfilter" | "interleavedfiltering" => Some(Algorithm::InterleavedFilter),
                "beatthemean" => Some(Algorithm::BeatTheMean),
                "seqelim" => Some(Algorithm::SequentialElimination),
                "singleelim" => Some(Algorithm::SingleElimination),
                "dtsplusplus" => Some(Algorithm::DtsPlusPlus),
                _ => None,
            })
            .ok_or_else(|| LearnerError::UnknownAlgorithm(s.to_string()))
    }
}

/// An algorithm plus hyperparameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub algorithm: Algorithm,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl AlgorithmSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        AlgorithmSpec { algorithm, params: BTreeMap::new() }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    /// Checks every override against the variant's accepted names and ranges.
    pub fn validate(&self) -> Result<(), LearnerError> {
        let defaults = self.algorithm.defaults();
        for (name, &value) in &self.params {
            let Some(&(_, _, lo, hi)) = defaults.iter().find(|d| d.0 == name) else {
                return Err(LearnerError::UnknownHyperparameter {
                    algorithm: self.algorithm,
                    name: name.clone(),
                });
            };
            if !(lo..=hi).contains(&value) || value.is_nan() {
                return Err(LearnerError::InvalidHyperparameter {
                    algorithm: self.algorithm,
                    name: name.clone(),
                    value,
                    reason: format!("expected a value in [{lo}, {hi}]"),
                });
            }
        }
        Ok(())
    }

    /// Value of a hyperparameter, falling back to the variant default.
    pub fn param(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or_else(|| {
            self.algorithm
                .defaults()
                .iter()
                .find(|d| d.0 == name)
                .map(|d| d.1)
                .unwrap_or_else(|| panic!("{} has no hyperparameter {name}", self.algorithm))
        })
    }

    /// All hyperparameters with defaults filled in.
    pub fn resolved(&self) -> BTreeMap<String, f64> {
        self.algorithm
            .defaults()
            .iter()
            .map(|d| (d.0.to_string(), self.param(d.0)))
            .collect()
    }
}

impl From<Algorithm> for AlgorithmSpec {
    fn from(a: Algorithm) -> Self {
        AlgorithmSpec::new(a)
    }
}

/// Per-variant interface used by [`LearnerState`].
pub(crate) trait Strategy {
    fn select(&mut self, counts: &WinCountMatrix, rng: &mut ChaCha8Rng) -> (usize, usize);

    /// Called after `counts` already includes the outcome.
    fn observe(
        &mut self,
        _counts: &WinCountMatrix,
        _rng: &mut ChaCha8Rng,
        _first: usize,
        _second: usize,
        _verdict: Verdict,
    ) {
    }

    fn declared_winner(&self) -> Option<usize> {
        None
    }

    /// Systems still under consideration.
    fn active(&self, k: usize) -> Vec<usize> {
        (0..k).collect()
    }
}

/// Variant-specific state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum VariantState {
    Uniform(Uniform),
    InterleavedFilter(InterleavedFilter),
    BeatTheMean(BeatTheMean),
    SequentialElimination(SequentialElimination),
    PlackettLuce(PlackettLuce),
    Knockout(Knockout),
    SingleElimination(SingleElimination),
    Rucb(Rucb),
    Rcs(Rcs),
    Rmed(Rmed),
    Savage(Savage),
    Ccb(Ccb),
    Dts(Dts),
}

macro_rules! dispatch {
    ($self:expr, $s:ident => $body:expr) => {
        match $self {
            VariantState::Uniform($s) => $body,
            VariantState::InterleavedFilter($s) => $body,
            VariantState::BeatTheMean($s) => $body,
            VariantState::SequentialElimination($s) => $body,
            VariantState::PlackettLuce($s) => $body,
            VariantState::Knockout($s) => $body,
            VariantState::SingleElimination($s) => $body,
            VariantState::Rucb($s) => $body,
            VariantState::Rcs($s) => $body,
            VariantState::Rmed($s) => $body,
            VariantState::Savage($s) => $body,
            VariantState::Ccb($s) => $body,
            VariantState::Dts($s) => $body,
        }
    };
}

/// A learner: counts of all applied outcomes, variant state and generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    spec: AlgorithmSpec,
    k: usize,
    seed: u64,
    counts: WinCountMatrix,
    rng: ChaCha8Rng,
    variant: VariantState,
    selections: u64,
}

/// Self-describing, versioned learner snapshot.
#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    format: String,
    version: u32,
    state: LearnerState,
}

const SNAPSHOT_FORMAT: &str = "activeval-learner";

impl LearnerState {
    /// Fresh learner over `k` systems; fully determined by `seed`.
    pub fn new(spec: AlgorithmSpec, k: usize, seed: u64) -> Result<Self, LearnerError> {
        if k < 2 {
            return Err(LearnerError::TooFewSystems(k));
        }
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let variant = match spec.algorithm {
            Algorithm::Uniform => VariantState::Uniform(Uniform::new(k)),
            Algorithm::InterleavedFilter => VariantState::InterleavedFilter(
                InterleavedFilter::new(k, spec.param("horizon"), &mut rng),
            ),
            Algorithm::BeatTheMean => VariantState::BeatTheMean(BeatTheMean::new(
                k,
                spec.param("horizon"),
                spec.param("gamma"),
            )),
            Algorithm::SequentialElimination => {
                VariantState::SequentialElimination(SequentialElimination::new(
                    k,
                    spec.param("epsilon"),
                    spec.param("delta"),
                    &mut rng,
                ))
            }
            Algorithm::PlackettLuce => {
                VariantState::PlackettLuce(PlackettLuce::new(k, spec.param("delta")))
            }
            Algorithm::Knockout => VariantState::Knockout(Knockout::new(
                k,
                spec.param("epsilon"),
                spec.param("delta"),
                spec.param("gamma"),
                &mut rng,
            )),
            Algorithm::SingleElimination => VariantState::SingleElimination(
                SingleElimination::new(k, spec.param("m").round() as u64, &mut rng),
            ),
            Algorithm::Rucb => VariantState::Rucb(Rucb::new(spec.param("alpha"))),
            Algorithm::Rcs => VariantState::Rcs(Rcs::new(k, spec.param("alpha"))),
            Algorithm::Rmed => VariantState::Rmed(Rmed::new(
                k,
                spec.param("f_scale"),
                spec.param("f_exponent"),
            )),
            Algorithm::Savage => VariantState::Savage(Savage::new(k, spec.param("delta"))),
            Algorithm::Ccb => VariantState::Ccb(Ccb::new(k, spec.param("alpha"))),
            Algorithm::Dts => VariantState::Dts(Dts::new(spec.param("alpha"), false)),
            Algorithm::DtsPlusPlus => VariantState::Dts(Dts::new(spec.param("alpha"), true)),
        };
        Ok(LearnerState {
            spec,
            k,
            seed,
            counts: WinCountMatrix::new(k),
            rng,
            variant,
            selections: 0,
        })
    }

    pub fn spec(&self) -> &AlgorithmSpec {
        &self.spec
    }

    pub fn algorithm(&self) -> Algorithm {
        self.spec.algorithm
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counts(&self) -> &WinCountMatrix {
        &self.counts
    }

    pub fn variant(&self) -> &VariantState {
        &self.variant
    }

    /// Number of `select` calls so far.
    pub fn selections(&self) -> u64 {
        self.selections
    }

    /// Winner declared by a terminating variant, if it has terminated.
    pub fn declared_winner(&self) -> Option<SystemId> {
        dispatch!(&self.variant, s => s.declared_winner()).map(SystemId)
    }

    pub fn is_terminated(&self) -> bool {
        self.declared_winner().is_some()
    }

    /// Systems the variant still considers.
    pub fn active_set(&self) -> Vec<SystemId> {
        let k = self.k;
        dispatch!(&self.variant, s => s.active(k))
            .into_iter()
            .map(SystemId)
            .collect()
    }

    /// Next ordered pair of distinct systems to compare.
    pub fn select_pair(&mut self) -> Result<(SystemId, SystemId), LearnerError> {
        if let Some(winner) = self.declared_winner() {
            return Err(LearnerError::Terminated { winner });
        }
        let counts = &self.counts;
        let rng = &mut self.rng;
        let (a, b) = dispatch!(&mut self.variant, s => s.select(counts, rng));
        debug_assert!(a != b && a < self.k && b < self.k, "bad pair ({a}, {b})");
        self.selections += 1;
        Ok((SystemId(a), SystemId(b)))
    }

    /// Applies one outcome. The pair need not be the latest selection.
    pub fn update(&mut self, outcome: &ComparisonOutcome) -> Result<(), LearnerError> {
        self.apply(outcome.first, outcome.second, outcome.verdict)
    }

    pub fn apply(
        &mut self,
        first: SystemId,
        second: SystemId,
        verdict: Verdict,
    ) -> Result<(), LearnerError> {
        self.counts.record(first, second, verdict)?;
        let counts = &self.counts;
        let rng = &mut self.rng;
        dispatch!(&mut self.variant, s => s.observe(counts, rng, first.0, second.0, verdict));
        Ok(())
    }

    /// Declared winner when terminated, else the empirical Copeland winner.
    pub fn recommend(&self) -> SystemId {
        self.declared_winner()
            .unwrap_or_else(|| copeland_winner(&self.counts))
    }

    pub fn to_snapshot(&self) -> String {
        serde_json::to_string(&Snapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            state: self.clone(),
        })
        .expect("learner state is always serializable")
    }

    pub fn from_snapshot(text: &str) -> Result<Self, LearnerError> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header =
            serde_json::from_str(text).map_err(|e| LearnerError::Snapshot(e.to_string()))?;
        if header.format != SNAPSHOT_FORMAT {
            return Err(LearnerError::Snapshot(format!(
                "unexpected format tag {:?}",
                header.format
            )));
        }
        if header.version != SNAPSHOT_VERSION {
            return Err(LearnerError::SnapshotVersion { found: header.version });
        }
        let snap: Snapshot =
            serde_json::from_str(text).map_err(|e| LearnerError::Snapshot(e.to_string()))?;
        Ok(snap.state)
    }
}

/// Convenience wrapper matching the functional `create_learner` signature.
pub fn create_learner(
    spec: impl Into<AlgorithmSpec>,
    k: usize,
    seed: u64,
) -> Result<LearnerState, LearnerError> {
    LearnerState::new(spec.into(), k, seed)
}
