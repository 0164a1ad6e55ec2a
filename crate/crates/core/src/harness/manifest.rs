use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    accuracy_curve, annotation_complexity, derive_seed, run_seeds, Complexity, ComplexityConfig, HarnessError,
    RunSetup, RunTrace,
};
use crate::environment::{JudgmentDataset, PreferenceSource, ScoredInstanceSpec, SyntheticSpec};
use crate::learners::{Algorithm, AlgorithmSpec};
use crate::metric::{predict_pair, MetricScoreTable};
use crate::model_based::{
    ucb_eliminate, EliminationReport, FeedbackPolicy, ModalPredictor, ModelBasedError, Predictor, RandomPredictor,
    UcbEliminationConfig, UncertaintyConfig,
};
use crate::metric::PairwisePrediction;
use crate::preference::{condorcet_winner, SystemId};
use crate::probability::{calibrate, BtlShift, CalibrationRecord, FittedModel, ProbabilityModelKind, ValidationPair};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Where judgments come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    Synthetic(SyntheticSpec),
    /// Synthetic judgments with matching metric scores.
    Scored(ScoredInstanceSpec),
    /// A judgment file; relative paths resolve against the manifest.
    Dataset { judgments: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetricSource {
    /// Score table plus calibrated probability model.
    #[default]
    Table,
    /// Always the most likely human verdict (scored environments only).
    Modal,
    /// A uniformly random verdict.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    #[serde(default)]
    pub source: MetricSource,
    /// Score file for dataset environments.
    #[serde(default)]
    pub scores: Option<PathBuf>,
    #[serde(default = "default_model")]
    pub model: ProbabilityModelKind,
    #[serde(default)]
    pub btl_shift: BtlShift,
    /// Calibration record (JSON); fitted from the environment when absent.
    #[serde(default)]
    pub calibration: Option<PathBuf>,
    /// Validation draws used when fitting on a scored environment.
    #[serde(default = "default_calibration_size")]
    pub calibration_size: usize,
}

fn default_model() -> ProbabilityModelKind {
    ProbabilityModelKind::Linear
}

fn default_calibration_size() -> usize {
    2000
}

/// One configuration to measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub label: Option<String>,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub policy: FeedbackPolicy,
    /// Sets an uncertainty threshold so that about this share of
    /// comparisons goes to humans; overrides the configured threshold.
    #[serde(default)]
    pub human_fraction: Option<f64>,
    #[serde(default)]
    pub elimination: Option<UcbEliminationConfig>,
    #[serde(default)]
    pub delay: usize,
}

impl RunConfig {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.algorithm.name().to_string())
    }
}

/// Declarative experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub master_seed: u64,
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub metric: Option<MetricConfig>,
    #[serde(default)]
    pub config: ComplexityConfig,
    pub runs: Vec<RunConfig>,
}

fn manifest_err(path: impl Into<String>, message: impl ToString) -> HarnessError {
    HarnessError::Manifest { path: path.into(), message: message.to_string() }
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let m: Manifest = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let at = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "manifest".into());
            manifest_err(at, message)
        })?;
        m.validate()?;
        Ok(m)
    }

    /// Loads a manifest; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let mut m = Self::parse(&fs::read_to_string(path)?)?;
        if let Some(dir) = path.parent() {
            m.resolve_paths(dir);
        }
        Ok(m)
    }

    pub fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let EnvironmentConfig::Dataset { judgments } = &mut self.environment {
            fix(judgments);
        }
        if let Some(metric) = &mut self.metric {
            if let Some(p) = metric.scores.as_mut() {
                fix(p);
            }
            if let Some(p) = metric.calibration.as_mut() {
                fix(p);
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is always serializable")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(manifest_err(
                "schema_version",
                format!("unsupported version {} (expected {MANIFEST_SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.config.validate().map_err(|e| manifest_err("config", e))?;
        if self.runs.is_empty() {
            return Err(manifest_err("runs", "at least one run is required"));
        }
        if let Some(m) = &self.metric {
            let is_dataset = matches!(self.environment, EnvironmentConfig::Dataset { .. });
            let is_scored = matches!(self.environment, EnvironmentConfig::Scored(_));
            if m.source == MetricSource::Table && is_dataset && m.scores.is_none() {
                return Err(manifest_err("metric.scores", "a score file is required for dataset environments"));
            }
            if m.source == MetricSource::Table && !is_dataset && !is_scored {
                return Err(manifest_err("metric.source", "table predictions need a scored or dataset environment"));
            }
            if m.source == MetricSource::Modal && !is_scored {
                return Err(manifest_err("metric.source", "modal predictions need a scored environment"));
            }
        }
        let mut labels = std::collections::BTreeSet::new();
        for (i, r) in self.runs.iter().enumerate() {
            let at = |field: &str| format!("runs[{i}].{field}");
            AlgorithmSpec { algorithm: r.algorithm, params: r.params.clone() }
                .validate()
                .map_err(|e| manifest_err(at("params"), e))?;
            if !labels.insert(r.label()) {
                return Err(manifest_err(at("label"), format!("duplicate label {:?}", r.label())));
            }
            let needs_metric = r.policy.uses_metric() || r.elimination.is_some();
            if needs_metric && self.metric.is_none() {
                return Err(manifest_err(at("policy"), "metric feedback or elimination requires a [metric] section"));
            }
            if let Some(e) = &r.elimination {
                e.validate().map_err(|e| manifest_err(at("elimination"), e))?;
                if self.metric.as_ref().is_some_and(|m| m.source != MetricSource::Table) {
                    return Err(manifest_err(at("elimination"), "elimination needs table predictions"));
                }
            }
            if let Some(f) = r.human_fraction {
                if !(0.0..=1.0).contains(&f) || !matches!(r.policy, FeedbackPolicy::UncertaintyGated(_)) {
                    return Err(manifest_err(
                        at("human_fraction"),
                        "must lie in [0, 1] and is only valid with uncertainty_gated",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Score table lookups for a source whose system and example order differ.
struct MappedTable<'a> {
    table: &'a MetricScoreTable,
    model: FittedModel,
    systems: Vec<usize>,
    examples: Vec<usize>,
}

impl Predictor for MappedTable<'_> {
    fn predict(&self, a: usize, b: usize, e: usize, _rng: &mut ChaCha8Rng) -> Result<PairwisePrediction, ModelBasedError> {
        Ok(predict_pair(self.table, &self.model, self.systems[a], self.systems[b], self.examples[e])?)
    }
}

impl MappedTable<'_> {
    fn eliminate(&self, cfg: UcbEliminationConfig) -> Result<EliminationReport, ModelBasedError> {
        let roster: Vec<String> = self.systems.iter().map(|&s| self.table.systems()[s].clone()).collect();
        let sub = self.table.restrict(&roster)?;
        let all: Vec<usize> = (0..sub.examples().len()).collect();
        ucb_eliminate(&sub, &self.model, cfg, |_, _| all.clone())
    }
}

/// Pairs every recorded judgment with the metric scores of its two outputs.
pub fn judgment_validation(
    dataset: &JudgmentDataset,
    table: &MetricScoreTable,
) -> Result<Vec<ValidationPair>, HarnessError> {
    let mut systems = Vec::with_capacity(dataset.k());
    for name in dataset.roster() {
        systems.push(
            table
                .system_index(name)
                .ok_or_else(|| manifest_err("metric.scores", format!("no scores for system {name:?}")))?,
        );
    }
    dataset
        .judgments()
        .map(|(a, b, e, v)| {
            let name = dataset.example_name(e);
            let ex = table
                .example_index(&name)
                .ok_or_else(|| manifest_err("metric.scores", format!("no scores for example {name:?}")))?;
            Ok(ValidationPair {
                first: table.entry(systems[a], ex)?.mean,
                second: table.entry(systems[b], ex)?.mean,
                human: v,
            })
        })
        .collect()
}

/// Per-run results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub algorithm: Algorithm,
    pub policy: String,
    pub elimination: bool,
    pub survivors: usize,
    pub delay: usize,
    pub seeds: usize,
    pub complexity: Complexity,
    pub terminal_accuracy: f64,
    pub mean_human_annotations: f64,
    pub mean_model_feedback: f64,
}

/// Everything an experiment produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub name: String,
    pub truth: SystemId,
    pub summaries: Vec<RunSummary>,
    pub traces: Vec<Vec<RunTrace>>,
    pub curves: Vec<Vec<(u64, f64)>>,
    pub eliminations: Vec<Option<EliminationReport>>,
}

fn describe_policy(p: &FeedbackPolicy) -> String {
    match p {
        FeedbackPolicy::HumanOnly => "human_only".into(),
        FeedbackPolicy::RandomMixing(c) => format!("random_mixing(p_m={})", c.p_m),
        FeedbackPolicy::UncertaintyGated(c) => format!("uncertainty_gated({:?}>{:.6})", c.measure, c.threshold),
    }
}

fn fmt_opt(v: Option<u64>) -> String {
    v.map(|n| n.to_string()).unwrap_or_else(|| "not identified".into())
}

impl ReportBundle {
    pub fn complexity_csv(&self) -> String {
        let mut out = String::from(
            "label,algorithm,policy,elimination,survivors,delay,seeds,complexity,first_crossing,terminal_accuracy,mean_human_annotations,mean_model_feedback\n",
        );
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{:.4},{:.1},{:.1}",
                s.label,
                s.algorithm,
                s.policy,
                s.elimination,
                s.survivors,
                s.delay,
                s.seeds,
                fmt_opt(s.complexity.last_crossing),
                fmt_opt(s.complexity.first_crossing),
                s.terminal_accuracy,
                s.mean_human_annotations,
                s.mean_model_feedback
            );
        }
        out
    }

    pub fn curves_csv(&self) -> String {
        let mut out = String::from("label,n,accuracy\n");
        for (s, curve) in self.summaries.iter().zip(&self.curves) {
            for (n, a) in curve {
                let _ = writeln!(out, "{},{n},{a:.6}", s.label);
            }
        }
        out
    }

    /// Writes `complexity.csv`, `curves.csv`, `traces/<label>.jsonl` and
    /// `elimination/<label>.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir.join("traces"))?;
        fs::write(dir.join("complexity.csv"), self.complexity_csv())?;
        fs::write(dir.join("curves.csv"), self.curves_csv())?;
        for (s, traces) in self.summaries.iter().zip(&self.traces) {
            let mut text = String::new();
            for t in traces {
                text.push_str(&serde_json::to_string(t).expect("trace serializes"));
                text.push('\n');
            }
            fs::write(dir.join("traces").join(format!("{}.jsonl", file_label(&s.label))), text)?;
        }
        for (s, e) in self.summaries.iter().zip(&self.eliminations) {
            if let Some(report) = e {
                fs::create_dir_all(dir.join("elimination"))?;
                fs::write(dir.join("elimination").join(format!("{}.csv", file_label(&s.label))), report.to_csv())?;
            }
        }
        Ok(())
    }
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '+' { c } else { '_' })
        .collect()
}

/// Threshold such that about `fraction` of random comparisons go to humans.
fn threshold_for_fraction(
    predictor: &dyn Predictor,
    source: &dyn PreferenceSource,
    cfg: UncertaintyConfig,
    fraction: f64,
    n: usize,
    seed: u64,
) -> Result<f64, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = source.k();
    let mut scores = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.random_range(0..k);
        let b = (a + rng.random_range(1..k)) % k;
        let d = source.draw(a, b, &mut rng)?;
        scores.push(cfg.score(&predictor.predict(a, b, d.example, &mut rng)?)?);
    }
    Ok(crate::model_based::threshold_for_human_fraction(&scores, fraction))
}

enum Env {
    Synthetic(crate::environment::SyntheticSource),
    Scored(crate::environment::ScoredInstance),
    Dataset(JudgmentDataset),
}

impl Env {
    fn source(&self) -> &dyn PreferenceSource {
        match self {
            Env::Synthetic(s) => s,
            Env::Scored(s) => s,
            Env::Dataset(d) => d,
        }
    }
}

/// Runs every configuration of the manifest over `config.seeds` seeds.
pub fn run_experiment(manifest: &Manifest) -> Result<ReportBundle, HarnessError> {
    manifest.validate()?;
    let env = match &manifest.environment {
        EnvironmentConfig::Synthetic(s) => Env::Synthetic(s.build()?),
        EnvironmentConfig::Scored(s) => Env::Scored(s.build()?),
        EnvironmentConfig::Dataset { judgments } => {
            let ds = JudgmentDataset::load(judgments)?;
            ds.check_coverage()?;
            Env::Dataset(ds)
        }
    };
    let source = env.source();
    let truth = condorcet_winner(&source.matrix()).ok_or(HarnessError::NoTruth)?;

    let loaded_table;
    let table: Option<&MetricScoreTable> = match (&env, &manifest.metric) {
        (_, None) => None,
        (Env::Scored(inst), Some(_)) => Some(inst.table()),
        (_, Some(m)) => match &m.scores {
            Some(path) => {
                loaded_table = MetricScoreTable::load(path)?;
                Some(&loaded_table)
            }
            None => None,
        },
    };

    let mapped = match (table, &manifest.metric) {
        (Some(table), Some(m)) if m.source == MetricSource::Table => {
            Some(build_mapped(table, m, &env, manifest.master_seed)?)
        }
        _ => None,
    };
    let predictor: Option<Box<dyn Predictor + '_>> = match (&manifest.metric, &env) {
        (None, _) => None,
        (Some(m), Env::Scored(inst)) if m.source == MetricSource::Modal => Some(Box::new(ModalPredictor(inst))),
        (Some(m), _) if m.source == MetricSource::Random => Some(Box::new(RandomPredictor)),
        _ => None,
    };
    let predictor: Option<&dyn Predictor> = match (&mapped, &predictor) {
        (Some(m), _) => Some(m as &dyn Predictor),
        (None, Some(p)) => Some(p.as_ref()),
        (None, None) => None,
    };

    let cfg = manifest.config;
    let mut bundle = ReportBundle {
        name: manifest.name.clone(),
        truth,
        summaries: Vec::new(),
        traces: Vec::new(),
        curves: Vec::new(),
        eliminations: Vec::new(),
    };
    for (i, run) in manifest.runs.iter().enumerate() {
        let mut policy = run.policy;
        if let (Some(f), FeedbackPolicy::UncertaintyGated(u)) = (run.human_fraction, &mut policy) {
            let p = predictor.ok_or_else(|| manifest_err(format!("runs[{i}].policy"), "no predictor"))?;
            let seed = derive_seed(manifest.master_seed, i as u64, u64::MAX);
            u.threshold = threshold_for_fraction(p, source, *u, f, 5000, seed)?;
        }
        let elimination = match (&run.elimination, &mapped) {
            (Some(e), Some(m)) => Some(m.eliminate(*e)?),
            _ => None,
        };
        let setup = RunSetup {
            spec: AlgorithmSpec { algorithm: run.algorithm, params: run.params.clone() },
            policy,
            survivors: elimination.as_ref().map(|e| e.survivors.clone()),
            delay: run.delay,
        };
        let traces = run_seeds(source, predictor, &setup, &cfg, manifest.master_seed, i as u64)?;
        let complexity = annotation_complexity(&traces, truth, cfg.delta_acc)?;
        let curve = accuracy_curve(&traces, truth)?;
        let n = traces.len() as f64;
        bundle.summaries.push(RunSummary {
            label: run.label(),
            algorithm: run.algorithm,
            policy: describe_policy(&policy),
            elimination: elimination.is_some(),
            survivors: elimination.as_ref().map(|e| e.survivors.len()).unwrap_or(source.k()),
            delay: run.delay,
            seeds: traces.len(),
            complexity,
            terminal_accuracy: traces.iter().filter(|t| t.terminal == truth).count() as f64 / n,
            mean_human_annotations: traces.iter().map(|t| t.human_annotations as f64).sum::<f64>() / n,
            mean_model_feedback: traces.iter().map(|t| t.model_feedback as f64).sum::<f64>() / n,
        });
        bundle.traces.push(traces);
        bundle.curves.push(curve);
        bundle.eliminations.push(elimination);
    }
    Ok(bundle)
}

fn build_mapped<'a>(
    table: &'a MetricScoreTable,
    m: &MetricConfig,
    env: &Env,
    master: u64,
) -> Result<MappedTable<'a>, HarnessError> {
    let source = env.source();
    let (systems, examples): (Vec<usize>, Vec<usize>) = match env {
        Env::Scored(_) => ((0..source.k()).collect(), (0..source.examples()).collect()),
        Env::Dataset(ds) => {
            let systems = ds
                .roster()
                .iter()
                .map(|s| table.system_index(s).ok_or_else(|| manifest_err("metric.scores", format!("no scores for system {s:?}"))))
                .collect::<Result<_, _>>()?;
            let examples = (0..source.examples())
                .map(|e| {
                    let name = source.example_name(e);
                    table
                        .example_index(&name)
                        .ok_or_else(|| manifest_err("metric.scores", format!("no scores for example {name:?}")))
                })
                .collect::<Result<_, _>>()?;
            (systems, examples)
        }
        Env::Synthetic(_) => return Err(manifest_err("metric.source", "synthetic environments have no scores")),
    };
    let model = match &m.calibration {
        Some(path) => {
            let rec: CalibrationRecord = serde_json::from_str(&fs::read_to_string(path)?)
                .map_err(|e| manifest_err("metric.calibration", e))?;
            rec.fitted()
        }
        None => {
            let validation = match env {
                Env::Dataset(ds) => judgment_validation(ds, table)?,
                _ => {
                    // Fresh validation draws from the environment.
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master, u64::MAX, 0));
                    let k = source.k();
                    let mut out = Vec::with_capacity(m.calibration_size);
                    for _ in 0..m.calibration_size {
                        let a = rng.random_range(0..k);
                        let b = (a + rng.random_range(1..k)) % k;
                        let d = source.draw(a, b, &mut rng)?;
                        let o = crate::environment::Annotator::new(source, 0).reveal(d);
                        out.push(ValidationPair {
                            first: table.entry(systems[a], examples[d.example])?.mean,
                            second: table.entry(systems[b], examples[d.example])?.mean,
                            human: o.verdict,
                        });
                    }
                    out
                }
            };
            calibrate("metric", m.model, &validation, m.btl_shift)?.fitted()
        }
    };
    Ok(MappedTable { table, model, systems, examples })
}
