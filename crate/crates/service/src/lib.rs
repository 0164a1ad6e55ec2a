//! Live annotation sessions over HTTP.
//!
//! A session owns a learner and an append-only event log. Every mutation
//! (a task handed out, a human judgment, a metric answer) is written to the
//! log before it is acknowledged, and replaying the log from scratch rebuilds
//! the learner bit for bit. [`SessionStore`] keeps sessions in memory and on
//! disk; [`router`] exposes them to annotation front ends.

mod api;
mod session;
mod store;

pub use api::{router, serve, ApiState};
pub use session::{
    Choice, CreateSession, Event, LeaderboardEntry, Leaderboard, LiveMetric, LogRecord, NextTask, OutputsPayload,
    PairCount, Session, SessionHeader, SessionInfo, SessionStatus, ShownText, Submission, SubmitResponse, Task,
    DEFAULT_STOPPING_WINDOW,
};
pub use store::SessionStore;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/service.md")]
mod book_service {}

use activeval::environment::EnvironmentError;
use activeval::learners::LearnerError;
use activeval::metric::MetricError;
use activeval::model_based::ModelBasedError;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("no session {0:?}")]
    NotFound(String),
    #[error("no outstanding task {0}")]
    UnknownTask(u64),
    #[error("task {0} was already judged")]
    DuplicateTask(u64),
    #[error("task {0} expired")]
    Expired(u64),
    #[error("log replay diverged at record {seq}: {message}")]
    Replay { seq: u64, message: String },
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    ModelBased(#[from] ModelBasedError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error("malformed log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
