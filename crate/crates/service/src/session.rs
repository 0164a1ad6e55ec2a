use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use activeval::environment::{ReferenceRecord, SystemOutputRecord, SystemOutputs};
use activeval::learners::{Algorithm, AlgorithmSpec};
use activeval::metric::{predict_pair, MetricScoreTable, PairwisePrediction, ScoreRecord};
use activeval::model_based::{
    ucb_eliminate, ComposedLearner, EliminationReport, FeedbackPolicy, Responder, UcbEliminationConfig,
};
use activeval::preference::{copeland_scores, ComparisonOutcome, Source, SystemId, Verdict, WinCountMatrix};
use activeval::probability::{CalibrationRecord, FittedModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const DEFAULT_STOPPING_WINDOW: u64 = 200;

/// Metric answers in a row before a human is asked regardless.
const MAX_MODEL_STREAK: u32 = 10_000;

fn default_window() -> u64 {
    DEFAULT_STOPPING_WINDOW
}

/// System outputs either as records or as the raw text of a JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutputsPayload {
    Records(Vec<SystemOutputRecord>),
    Jsonl(String),
}

impl OutputsPayload {
    fn parse(&self) -> Result<SystemOutputs, ServiceError> {
        Ok(match self {
            OutputsPayload::Records(r) => SystemOutputs::from_records(r.iter().cloned())?,
            OutputsPayload::Jsonl(text) => SystemOutputs::read_jsonl(text.as_bytes())?,
        })
    }
}

/// Metric scores and a fitted model for model feedback and elimination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveMetric {
    pub scores: Vec<ScoreRecord>,
    pub calibration: CalibrationRecord,
}

/// Body of `POST /sessions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub name: String,
    pub outputs: OutputsPayload,
    /// Source text shown next to each example.
    #[serde(default)]
    pub contexts: Vec<ReferenceRecord>,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub policy: FeedbackPolicy,
    #[serde(default)]
    pub metric: Option<LiveMetric>,
    #[serde(default)]
    pub elimination: Option<UcbEliminationConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Human annotations with an unchanged recommendation before convergence.
    #[serde(default = "default_window")]
    pub stopping_window: u64,
    /// Maximum number of human annotations.
    #[serde(default)]
    pub budget: Option<u64>,
    #[serde(default)]
    pub task_timeout_secs: Option<u64>,
}

impl CreateSession {
    pub fn new(outputs: Vec<SystemOutputRecord>, algorithm: Algorithm) -> Self {
        CreateSession {
            name: String::new(),
            outputs: OutputsPayload::Records(outputs),
            contexts: Vec::new(),
            algorithm,
            params: BTreeMap::new(),
            policy: FeedbackPolicy::HumanOnly,
            metric: None,
            elimination: None,
            seed: None,
            stopping_window: DEFAULT_STOPPING_WINDOW,
            budget: None,
            task_timeout_secs: None,
        }
    }
}

/// First thing persisted for a session; together with the log it is the
/// whole session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub id: String,
    pub created_ms: u64,
    pub seed: u64,
    pub request: CreateSession,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Converged,
    Exhausted,
}

/// Which displayed text the annotator preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Left,
    Right,
    Tie,
}

impl Choice {
    /// Verdict for the canonical `(first, second)` order.
    pub fn verdict(self, swapped: bool) -> Verdict {
        let v = match self {
            Choice::Left => Verdict::Win,
            Choice::Right => Verdict::Loss,
            Choice::Tie => Verdict::Tie,
        };
        if swapped {
            v.flip()
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// A pair was handed to a human. `swapped` means `second` is shown on the left.
    Issued {
        task: u64,
        first: SystemId,
        second: SystemId,
        example_id: String,
        swapped: bool,
        annotator: String,
    },
    Judgment {
        task: u64,
        first: SystemId,
        second: SystemId,
        example_id: String,
        choice: Choice,
        outcome: Verdict,
        annotator: String,
    },
    /// The metric answered in place of a human.
    Model {
        first: SystemId,
        second: SystemId,
        example_id: String,
        outcome: Verdict,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: u64,
    pub first: SystemId,
    pub second: SystemId,
    pub example: usize,
    pub swapped: bool,
    pub annotator: String,
    pub issued_ms: u64,
}

/// One side of a task as shown to an annotator. System names stay hidden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShownText {
    pub label: String,
    pub text: String,
}

/// Response of `GET /sessions/{id}/next`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NextTask {
    Task {
        task_id: u64,
        example_id: String,
        context: Option<String>,
        left: ShownText,
        right: ShownText,
        human_annotations: u64,
    },
    Done {
        status: SessionStatus,
        recommendation: String,
    },
}

/// Body of `POST /sessions/{id}/judgments`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub task_id: u64,
    pub choice: Choice,
    #[serde(default)]
    pub annotator: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub system_id: String,
    pub copeland: f64,
    pub wins: f64,
    pub comparisons: u64,
    pub eliminated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCount {
    pub first: String,
    pub second: String,
    pub comparisons: u64,
    pub p_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub status: SessionStatus,
    pub recommendation: String,
    pub human_annotations: u64,
    pub model_feedback: u64,
    pub stable_for: u64,
    pub stopping_window: u64,
    pub systems: Vec<LeaderboardEntry>,
    pub pairs: Vec<PairCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub seq: u64,
    pub outcome: Verdict,
    pub leaderboard: Leaderboard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub name: String,
    pub status: SessionStatus,
    pub algorithm: Algorithm,
    pub policy: FeedbackPolicy,
    pub systems: Vec<String>,
    pub survivors: Vec<String>,
    pub examples: usize,
    pub human_annotations: u64,
    pub model_feedback: u64,
    pub outstanding: usize,
    pub log_length: u64,
    pub recommendation: String,
    pub elimination: Option<EliminationReport>,
}

/// What the learner wants next.
enum Proposal {
    Model { first: SystemId, second: SystemId, example: usize, outcome: Verdict },
    Human { first: SystemId, second: SystemId, example: usize, swapped: bool },
}

struct Metric {
    table: MetricScoreTable,
    model: FittedModel,
    /// Output example index -> table example index.
    examples: Vec<usize>,
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn derive(seed: u64, stream: u64) -> u64 {
    activeval::harness::derive_seed(seed, 0, stream)
}

/// A live session: learner, counters and the log they were built from.
pub struct Session {
    header: SessionHeader,
    outputs: SystemOutputs,
    contexts: HashMap<String, String>,
    metric: Option<Metric>,
    elimination: Option<EliminationReport>,
    learner: ComposedLearner,
    counts: WinCountMatrix,
    task_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
    outstanding: BTreeMap<u64, Task>,
    judged: BTreeSet<u64>,
    humans: u64,
    model_feedback: u64,
    model_streak: u32,
    last_recommendation: SystemId,
    stable_for: u64,
    next_seq: u64,
    log: Vec<LogRecord>,
    log_path: Option<PathBuf>,
}

impl Session {
    /// Validates the request and builds a fresh session (nothing persisted).
    pub fn create(id: String, request: CreateSession, seed: u64) -> Result<Self, ServiceError> {
        Self::from_header(SessionHeader { id, created_ms: now_ms(), seed, request })
    }

    pub fn from_header(header: SessionHeader) -> Result<Self, ServiceError> {
        let req = &header.request;
        let outputs = req.outputs.parse()?;
        let k = outputs.systems().len();
        if k < 2 {
            return Err(ServiceError::Invalid(format!("need at least 2 systems, got {k}")));
        }
        if req.stopping_window == 0 {
            return Err(ServiceError::Invalid("stopping_window must be at least 1".into()));
        }
        let mut contexts = HashMap::new();
        for c in &req.contexts {
            if outputs.examples().iter().all(|e| *e != c.example_id) {
                return Err(ServiceError::Invalid(format!("context for unknown example {:?}", c.example_id)));
            }
            contexts.insert(c.example_id.clone(), c.text.clone());
        }
        let needs_metric = req.policy.uses_metric() || req.elimination.is_some();
        let metric = match (&req.metric, needs_metric) {
            (Some(m), _) => Some(Self::metric(&outputs, m)?),
            (None, true) => {
                return Err(ServiceError::Invalid(
                    "model feedback and elimination need a metric section".into(),
                ))
            }
            (None, false) => None,
        };
        let elimination = match (&req.elimination, &metric) {
            (Some(cfg), Some(m)) => {
                let all: Vec<usize> = (0..m.table.examples().len()).collect();
                Some(ucb_eliminate(&m.table, &m.model, *cfg, |_, _| all.clone())?)
            }
            _ => None,
        };
        let spec = AlgorithmSpec { algorithm: req.algorithm, params: req.params.clone() };
        let learner = ComposedLearner::new(
            spec,
            k,
            derive(header.seed, 0),
            elimination.as_ref().map(|e| e.survivors.as_slice()),
            req.policy,
        )?;
        let last_recommendation = learner.recommend();
        Ok(Session {
            task_rng: ChaCha8Rng::seed_from_u64(derive(header.seed, 1)),
            policy_rng: ChaCha8Rng::seed_from_u64(derive(header.seed, 2)),
            header,
            outputs,
            contexts,
            metric,
            elimination,
            learner,
            counts: WinCountMatrix::new(k),
            outstanding: BTreeMap::new(),
            judged: BTreeSet::new(),
            humans: 0,
            model_feedback: 0,
            model_streak: 0,
            last_recommendation,
            stable_for: 0,
            next_seq: 0,
            log: Vec::new(),
            log_path: None,
        })
    }

    fn metric(outputs: &SystemOutputs, m: &LiveMetric) -> Result<Metric, ServiceError> {
        let full = MetricScoreTable::from_records(m.scores.iter().cloned())?;
        let table = full.restrict(outputs.systems())?;
        let examples = outputs
            .examples()
            .iter()
            .map(|e| {
                table.example_index(e).ok_or_else(|| {
                    ServiceError::Invalid(format!("metric scores are missing example {e:?}"))
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Metric { table, model: m.calibration.fitted(), examples })
    }

    /// Rebuilds a session by re-executing every logged event.
    pub fn replay(header: SessionHeader, records: impl IntoIterator<Item = LogRecord>) -> Result<Self, ServiceError> {
        let mut s = Self::from_header(header)?;
        for rec in records {
            s.replay_one(rec)?;
        }
        Ok(s)
    }

    fn replay_one(&mut self, rec: LogRecord) -> Result<(), ServiceError> {
        let mismatch = |message: String| ServiceError::Replay { seq: rec.seq, message };
        if rec.seq != self.next_seq {
            return Err(mismatch(format!("expected sequence number {}", self.next_seq)));
        }
        match &rec.event {
            Event::Issued { task, first, second, example_id, swapped, .. } => {
                match self.propose()? {
                    Proposal::Human { first: f, second: s, example, swapped: w }
                        if f == *first
                            && s == *second
                            && self.outputs.examples()[example] == *example_id
                            && w == *swapped
                            && *task == rec.seq => {}
                    _ => return Err(mismatch("recomputed selection differs from the logged task".into())),
                }
            }
            Event::Model { first, second, example_id, outcome } => match self.propose()? {
                Proposal::Model { first: f, second: s, example, outcome: o }
                    if f == *first && s == *second && self.outputs.examples()[example] == *example_id && o == *outcome => {}
                _ => return Err(mismatch("recomputed metric answer differs from the log".into())),
            },
            Event::Judgment { task, .. } => {
                if !self.outstanding.contains_key(task) {
                    return Err(mismatch(format!("judgment for task {task} that is not outstanding")));
                }
            }
        }
        self.apply(rec)
    }

    /// Persists to `path` from now on. Existing records are not rewritten.
    pub(crate) fn attach_log(&mut self, path: PathBuf) {
        self.log_path = Some(path);
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    pub fn id(&self) -> &str {
        &self.header.id
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn learner(&self) -> &ComposedLearner {
        &self.learner
    }

    pub fn counts(&self) -> &WinCountMatrix {
        &self.counts
    }

    pub fn human_annotations(&self) -> u64 {
        self.humans
    }

    pub fn model_feedback(&self) -> u64 {
        self.model_feedback
    }

    pub fn outstanding(&self) -> impl Iterator<Item = &Task> {
        self.outstanding.values()
    }

    pub fn recommendation(&self) -> SystemId {
        self.learner.recommend()
    }

    pub fn status(&self) -> SessionStatus {
        let req = &self.header.request;
        if self.learner.is_terminated() || self.stable_for >= req.stopping_window {
            SessionStatus::Converged
        } else if req.budget.is_some_and(|b| self.humans >= b) {
            SessionStatus::Exhausted
        } else {
            SessionStatus::Active
        }
    }

    fn system_name(&self, s: SystemId) -> String {
        self.outputs.systems()[s.0].clone()
    }

    /// Lets the learner pick the next pair and decides who answers it.
    fn propose(&mut self) -> Result<Proposal, ServiceError> {
        let (first, second) = self.learner.select_pair()?;
        let example = self.task_rng.random_range(0..self.outputs.examples().len());
        let swapped = self.task_rng.random_bool(0.5);
        let policy = self.header.request.policy;
        if let (true, Some(m)) = (policy.uses_metric(), &self.metric) {
            let pred: PairwisePrediction = predict_pair(&m.table, &m.model, first.0, second.0, m.examples[example])?;
            let responder = policy.decide(Some(&pred), &mut self.policy_rng)?;
            if responder == Responder::Model && self.model_streak < MAX_MODEL_STREAK {
                return Ok(Proposal::Model { first, second, example, outcome: pred.predicted });
            }
        }
        Ok(Proposal::Human { first, second, example, swapped })
    }

    fn append(&mut self, event: Event) -> Result<u64, ServiceError> {
        let rec = LogRecord { seq: self.next_seq, timestamp_ms: now_ms(), event };
        if let Some(path) = &self.log_path {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            let mut line = serde_json::to_string(&rec).expect("log records serialize");
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.sync_data()?;
        }
        let seq = rec.seq;
        self.apply(rec)?;
        Ok(seq)
    }

    /// The only place session state changes in response to an event.
    fn apply(&mut self, rec: LogRecord) -> Result<(), ServiceError> {
        match &rec.event {
            Event::Issued { task, first, second, example_id, swapped, annotator } => {
                let example = self.example_index(example_id)?;
                self.outstanding.insert(
                    *task,
                    Task {
                        id: *task,
                        first: *first,
                        second: *second,
                        example,
                        swapped: *swapped,
                        annotator: annotator.clone(),
                        issued_ms: rec.timestamp_ms,
                    },
                );
                self.model_streak = 0;
            }
            Event::Judgment { task, first, second, example_id, outcome, .. } => {
                self.outstanding.remove(task);
                self.judged.insert(*task);
                self.humans += 1;
                let o = ComparisonOutcome::new(*first, *second, *outcome, Source::Human, example_id.clone());
                self.feed(&o)?;
                let rec_now = self.learner.recommend();
                if rec_now == self.last_recommendation {
                    self.stable_for += 1;
                } else {
                    self.last_recommendation = rec_now;
                    self.stable_for = 0;
                }
            }
            Event::Model { first, second, example_id, outcome } => {
                self.model_feedback += 1;
                self.model_streak += 1;
                let o = ComparisonOutcome::new(*first, *second, *outcome, Source::Model, example_id.clone());
                self.feed(&o)?;
            }
        }
        self.next_seq = rec.seq + 1;
        self.log.push(rec);
        Ok(())
    }

    fn feed(&mut self, o: &ComparisonOutcome) -> Result<(), ServiceError> {
        self.counts.update(o).map_err(|e| ServiceError::Invalid(e.to_string()))?;
        if !self.learner.is_terminated() {
            self.learner.update(o)?;
        }
        Ok(())
    }

    fn example_index(&self, id: &str) -> Result<usize, ServiceError> {
        self.outputs
            .examples()
            .iter()
            .position(|e| e == id)
            .ok_or_else(|| ServiceError::Invalid(format!("unknown example {id:?}")))
    }

    fn done(&self) -> NextTask {
        NextTask::Done { status: self.status(), recommendation: self.system_name(self.recommendation()) }
    }

    /// Hands out a new task, letting the metric answer first where the policy
    /// says so.
    pub fn next_task(&mut self, annotator: &str) -> Result<NextTask, ServiceError> {
        loop {
            if self.status() != SessionStatus::Active {
                return Ok(self.done());
            }
            match self.propose()? {
                Proposal::Model { first, second, example, outcome } => {
                    let example_id = self.outputs.examples()[example].clone();
                    self.append(Event::Model { first, second, example_id, outcome })?;
                }
                Proposal::Human { first, second, example, swapped } => {
                    let example_id = self.outputs.examples()[example].clone();
                    let task = self.next_seq;
                    self.append(Event::Issued {
                        task,
                        first,
                        second,
                        example_id: example_id.clone(),
                        swapped,
                        annotator: annotator.to_string(),
                    })?;
                    let (l, r) = if swapped { (second, first) } else { (first, second) };
                    return Ok(NextTask::Task {
                        task_id: task,
                        context: self.contexts.get(&example_id).cloned(),
                        left: ShownText { label: "A".into(), text: self.outputs.text(l.0, example).to_string() },
                        right: ShownText { label: "B".into(), text: self.outputs.text(r.0, example).to_string() },
                        example_id,
                        human_annotations: self.humans,
                    });
                }
            }
        }
    }

    /// Records a human judgment for an outstanding task.
    pub fn submit(&mut self, submission: &Submission) -> Result<SubmitResponse, ServiceError> {
        let id = submission.task_id;
        let Some(task) = self.outstanding.get(&id) else {
            return Err(if self.judged.contains(&id) {
                ServiceError::DuplicateTask(id)
            } else {
                ServiceError::UnknownTask(id)
            });
        };
        if let Some(t) = self.header.request.task_timeout_secs {
            if now_ms().saturating_sub(task.issued_ms) > t * 1000 {
                return Err(ServiceError::Expired(id));
            }
        }
        let outcome = submission.choice.verdict(task.swapped);
        let event = Event::Judgment {
            task: id,
            first: task.first,
            second: task.second,
            example_id: self.outputs.examples()[task.example].clone(),
            choice: submission.choice,
            outcome,
            annotator: submission.annotator.clone().unwrap_or_else(|| task.annotator.clone()),
        };
        let seq = self.append(event)?;
        Ok(SubmitResponse { seq, outcome, leaderboard: self.leaderboard() })
    }

    pub fn leaderboard(&self) -> Leaderboard {
        let k = self.counts.k();
        let copeland = copeland_scores(&self.counts);
        let survivors = self.learner.systems();
        let systems = (0..k)
            .map(|i| LeaderboardEntry {
                system_id: self.system_name(SystemId(i)),
                copeland: copeland.0[i],
                wins: (0..k).filter(|&j| j != i).map(|j| self.counts.wins(i, j)).sum(),
                comparisons: (0..k).filter(|&j| j != i).map(|j| self.counts.trials(i, j)).sum(),
                eliminated: !survivors.contains(&SystemId(i)),
            })
            .collect();
        let mut pairs = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                pairs.push(PairCount {
                    first: self.system_name(SystemId(i)),
                    second: self.system_name(SystemId(j)),
                    comparisons: self.counts.trials(i, j),
                    p_hat: self.counts.p_hat(i, j),
                });
            }
        }
        Leaderboard {
            status: self.status(),
            recommendation: self.system_name(self.recommendation()),
            human_annotations: self.humans,
            model_feedback: self.model_feedback,
            stable_for: self.stable_for,
            stopping_window: self.header.request.stopping_window,
            systems,
            pairs,
        }
    }

    pub fn info(&self) -> SessionInfo {
        SessionInfo {
            id: self.header.id.clone(),
            name: self.header.request.name.clone(),
            status: self.status(),
            algorithm: self.header.request.algorithm,
            policy: self.header.request.policy,
            systems: self.outputs.systems().to_vec(),
            survivors: self.learner.systems().iter().map(|&s| self.system_name(s)).collect(),
            examples: self.outputs.examples().len(),
            human_annotations: self.humans,
            model_feedback: self.model_feedback,
            outstanding: self.outstanding.len(),
            log_length: self.next_seq,
            recommendation: self.system_name(self.recommendation()),
            elimination: self.elimination.clone(),
        }
    }

    /// The log as JSON lines.
    pub fn log_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.log {
            out.push_str(&serde_json::to_string(r).expect("log records serialize"));
            out.push('\n');
        }
        out
    }
}

/// Reads a log file. A torn final line (crash mid-write) is cut off the
/// file so later appends start on a clean line.
pub(crate) fn read_log(path: &Path) -> Result<Vec<LogRecord>, ServiceError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    let mut offset = 0usize;
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    for (i, line) in lines.iter().enumerate() {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            match serde_json::from_str(trimmed) {
                Ok(r) if line.ends_with('\n') => out.push(r),
                Ok(_) | Err(_) if i + 1 == lines.len() => {
                    log::warn!("{}: dropping torn final record", path.display());
                    OpenOptions::new().write(true).open(path)?.set_len(offset as u64)?;
                    break;
                }
                Ok(_) => unreachable!("only the last line can lack a newline"),
                Err(e) => return Err(ServiceError::Log { line: i + 1, message: e.to_string() }),
            }
        }
        offset += line.len();
    }
    Ok(out)
}
