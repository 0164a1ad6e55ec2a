//! Active evaluation of text-generation systems.
//!
//! Given `k` systems and a supply of pairwise human judgments, find the
//! best system (the Copeland winner) with as few judgments as possible.
//!
//! - [`learners`]: dueling-bandit pair selection and recommendation.
//! - [`preference`]: verdicts, preference matrices, win counts, Copeland scores.
//! - [`probability`]: turning metric scores into predicted verdicts.
//! - [`metric`]: score tables, chrF and BLEU, bootstrap samples.
//! - [`model_based`]: metric-answered comparisons and up-front elimination.
//! - [`environment`]: simulated and recorded annotators.
//! - [`harness`]: seeded runs, annotation complexity and experiment manifests.
//!
//! ```
//! use activeval::environment::{Annotator, SyntheticSpec};
//! use activeval::learners::{Algorithm, LearnerState};
//!
//! let source = SyntheticSpec::geometric_btl(4, 2.0, 0.0).build()?;
//! let mut annotator = Annotator::new(&source, 1);
//! let mut learner = LearnerState::new(Algorithm::Rucb.into(), 4, 2)?;
//! for _ in 0..2_000 {
//!     let (a, b) = learner.select_pair()?;
//!     learner.update(&annotator.query(a, b)?)?;
//! }
//! assert_eq!(learner.recommend().0, 3);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod learners;
pub mod preference;
pub mod probability;
pub mod metric;
pub mod environment;
pub mod model_based;
pub mod harness;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/learners.md")]
    mod learners {}
    #[doc = include_str!("../../../book/src/probability.md")]
    mod probability {}
    #[doc = include_str!("../../../book/src/model-based.md")]
    mod model_based {}
    #[doc = include_str!("../../../book/src/complexity.md")]
    mod complexity {}
}
