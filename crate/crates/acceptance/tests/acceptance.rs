//! Acceptance gates for the workspace, one printed line per gate:
//!
//! ```text
//! [PASS] 3 efficiency: ...
//! ```
//!
//! The process exits non-zero when any gate fails. `ACCEPTANCE_ONLY=1,5`
//! restricts the run to a subset; `ACTIVEVAL_WMT16_JUDGMENTS=<file>` points
//! gate 8 at an ingested judgment file (skipped otherwise).

mod oracles;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use activeval::environment::{
    JudgmentDataset, PreferenceSource, ScoredInstanceSpec, SyntheticSource, SyntheticSpec, SystemOutputRecord,
};
use activeval::harness::{
    annotation_complexity, derive_seed, k_scaling, run_experiment, run_seeds, Complexity, ComplexityConfig,
    Manifest, RunSetup, RunTrace,
};
use activeval::learners::Algorithm;
use activeval::metric::{MetricScoreTable, ScoreRecord};
use activeval::model_based::{bald_score, ucb_eliminate, EntropyBase, UcbEliminationConfig};
use activeval::preference::{copeland_count, copeland_scores, PreferenceMatrix, SystemId};
use activeval::probability::{
    calibrate, three_way_accuracy, BtlShift, FittedModel, ProbabilityModelKind, ScorePreprocessor, ThresholdPair,
};
use activeval_service::{Choice, CreateSession, NextTask, SessionStore, Submission};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Reference synthetic instance.
const K: usize = 10;
const RATIO: f64 = 1.3;
const TIE: f64 = 0.2;
const SEEDS: usize = 200;
const BUDGET: u64 = 50_000;
const DELTA_ACC: f64 = 0.05;

// Pinned tolerances.
const REL_TOL: f64 = 1e-9;
const MIN_CORRECT: usize = 190;
const EFFICIENCY_RATIO: f64 = 0.5;
const MODEL_GAIN: f64 = 0.5;
const MIN_RETAINED: usize = 198;
const MAX_DELAY_CV: f64 = 0.15;
const TARGET_ACCURACY: f64 = 0.85;
const ACCURACY_BAND: f64 = 0.02;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn reference() -> SyntheticSource {
    SyntheticSpec::geometric_btl(K, RATIO, TIE).build().expect("valid reference instance")
}

fn cfg(max_budget: u64) -> ComplexityConfig {
    ComplexityConfig { seeds: SEEDS, delta_acc: DELTA_ACC, max_budget, checkpoint_stride: 10, ..Default::default() }
}

fn fmt_cx(c: Option<u64>) -> String {
    c.map(|n| n.to_string()).unwrap_or_else(|| "n/i".into())
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs())
}

/// Traces shared between gates so the reference runs happen once.
#[derive(Default)]
struct Cache {
    reference: BTreeMap<(Algorithm, u64), (Vec<RunTrace>, Complexity)>,
}

impl Cache {
    fn reference_run(&mut self, alg: Algorithm, master: u64) -> &(Vec<RunTrace>, Complexity) {
        self.reference.entry((alg, master)).or_insert_with(|| {
            let src = reference();
            let traces = run_seeds(&src, None, &RunSetup::new(alg), &cfg(BUDGET), master, 0).expect("reference run");
            let c = annotation_complexity(&traces, SystemId(K - 1), DELTA_ACC).expect("complexity");
            (traces, c)
        })
    }
}

fn gate_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0001);
    let fixtures = 120;
    let mut failures: Vec<String> = Vec::new();
    for f in 0..fixtures {
        // Copeland.
        let k = rng.random_range(2..=8);
        let mut p = vec![vec![0.5; k]; k];
        for i in 0..k {
            for j in (i + 1)..k {
                let v = if rng.random_bool(0.2) { 0.5 } else { rng.random_range(0.0..=1.0) };
                p[i][j] = v;
                p[j][i] = 1.0 - v;
            }
        }
        let m = PreferenceMatrix::from_upper(k, |i, j| p[i][j]).expect("valid matrix");
        let want = oracles::copeland_counts(&p);
        let scores = copeland_scores(&m);
        for i in 0..k {
            if copeland_count(&m, i) != want[i] || !rel_close(scores.0[i] * (k - 1) as f64, want[i] as f64) {
                failures.push(format!("copeland fixture {f} system {i}"));
            }
        }

        // Annotation complexity.
        let traces_n = rng.random_range(1..=40);
        let checkpoints = rng.random_range(1..=50);
        let stride = rng.random_range(1..=20u64);
        let delta = [0.05, 0.1, 0.25, rng.random_range(0.01..0.5)][rng.random_range(0..4)];
        let bias: f64 = rng.random_range(0.5..1.0);
        let correct: Vec<Vec<bool>> = (0..traces_n)
            .map(|_| (0..checkpoints).map(|c| rng.random_bool((bias + c as f64 * 0.01).min(1.0))).collect())
            .collect();
        let traces: Vec<RunTrace> = correct
            .iter()
            .enumerate()
            .map(|(s, row)| RunTrace {
                seed: s as u64,
                stride,
                recommendations: row.iter().map(|&ok| if ok { SystemId(0) } else { SystemId(1 + s % 3) }).collect(),
                terminal: SystemId(0),
                human_annotations: 0,
                model_feedback: 0,
            })
            .collect();
        let got = annotation_complexity(&traces, SystemId(0), delta).expect("complexity");
        if (got.last_crossing, got.first_crossing) != oracles::complexity(&correct, delta, stride) {
            failures.push(format!("complexity fixture {f}"));
        }

        // UCB elimination.
        let k = rng.random_range(2..=8);
        let n = rng.random_range(1..=50);
        let l = rng.random_range(2..=20);
        let raw: Vec<Vec<Vec<f64>>> = (0..k)
            .map(|s| {
                let level = s as f64 * 0.05;
                (0..n).map(|_| (0..l).map(|_| level + rng.random_range(-0.3..0.3)).collect()).collect()
            })
            .collect();
        let records = (0..k).flat_map(|s| {
            let raw = &raw;
            (0..n).map(move |e| ScoreRecord {
                system_id: format!("s{s}"),
                example_id: format!("e{e}"),
                score: raw[s][e].iter().sum::<f64>() / l as f64,
                samples: Some(raw[s][e].clone()),
            })
        });
        let table = MetricScoreTable::from_records(records.collect::<Vec<_>>()).expect("table");
        let delta = rng.random_range(0.2..1.0);
        let model = FittedModel::new(ScorePreprocessor::Linear { delta }, ThresholdPair::default());
        let ucfg = UcbEliminationConfig {
            alpha: rng.random_range(0.0..2.0),
            copeland_threshold: [0.5, 0.8, 1.0, rng.random_range(0.0..=1.0)][rng.random_range(0..4)],
        };
        let all: Vec<usize> = (0..n).collect();
        let got = ucb_eliminate(&table, &model, ucfg, |_, _| all.clone()).expect("elimination");
        let want = oracles::ucb(&raw, delta, ucfg.alpha, ucfg.copeland_threshold);
        let pairs_ok = got.pairs.iter().all(|pe| {
            rel_close(pe.p_hat, want.p_hat[pe.i][pe.j]) && rel_close(pe.sigma, want.sigma[pe.i][pe.j])
        });
        let wins_ok = (0..k).all(|i| rel_close(got.optimistic_copeland[i] * (k - 1) as f64, want.wins[i] as f64));
        if !pairs_ok || !wins_ok || got.survivors != want.survivors {
            failures.push(format!("ucb fixture {f}"));
        }

        // BALD.
        let l = rng.random_range(1..=20);
        let samples: Vec<f64> = (0..l).map(|_| rng.random_range(0.0..=1.0)).collect();
        let bits = bald_score(&samples, EntropyBase::Bit).expect("bald");
        let nats = bald_score(&samples, EntropyBase::Nat).expect("bald");
        let want = oracles::bald_bits(&samples);
        if !rel_close(bits, want) || !rel_close(nats, want * std::f64::consts::LN_2) {
            failures.push(format!("bald fixture {f}"));
        }
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "{fixtures} fixtures x 4 operations, {} mismatches{}, {:.1}s",
        failures.len(),
        failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default(),
        elapsed.as_secs_f64()
    );
    verdict(failures.is_empty() && elapsed < Duration::from_secs(60), detail)
}

const IDENTIFIERS: [Algorithm; 9] = [
    Algorithm::Uniform,
    Algorithm::Rucb,
    Algorithm::Rcs,
    Algorithm::Rmed,
    Algorithm::Savage,
    Algorithm::Ccb,
    Algorithm::Dts,
    Algorithm::DtsPlusPlus,
    Algorithm::Knockout,
];

fn gate_identification(cache: &mut Cache) -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for alg in IDENTIFIERS {
        let (traces, c) = cache.reference_run(alg, 1);
        let last = traces[0].recommendations.len() - 1;
        let correct = traces.iter().filter(|t| t.recommendations[last] == SystemId(K - 1)).count();
        ok &= correct >= MIN_CORRECT;
        parts.push(format!("{} {correct}/{SEEDS} (cx {})", alg.name(), fmt_cx(c.last_crossing)));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(600);
    verdict(ok, format!("{}; {:.0}s", parts.join(", "), elapsed.as_secs_f64()))
}

fn gate_efficiency(cache: &mut Cache) -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for master in [1, 2] {
        let u = cache.reference_run(Algorithm::Uniform, master).1.last_crossing;
        let r = cache.reference_run(Algorithm::Rmed, master).1.last_crossing;
        match (u, r) {
            (Some(u), Some(r)) => {
                let ratio = r as f64 / u as f64;
                ok &= ratio <= EFFICIENCY_RATIO;
                parts.push(format!("seed {master}: RMED {r} / Uniform {u} = {ratio:.3}"));
            }
            _ => {
                ok = false;
                parts.push(format!("seed {master}: RMED {} / Uniform {}", fmt_cx(r), fmt_cx(u)));
            }
        }
    }
    verdict(ok, format!("{} (gate <= {EFFICIENCY_RATIO})", parts.join("; ")))
}

fn gate_scaling() -> Outcome {
    let start = Instant::now();
    let sources: Vec<SyntheticSource> = [4, 8, 12, 16]
        .iter()
        .map(|&k| SyntheticSpec::geometric_btl(k, RATIO, TIE).build().expect("valid instance"))
        .collect();
    let refs: Vec<&dyn PreferenceSource> = sources.iter().map(|s| s as _).collect();
    let mut parts = Vec::new();
    let mut ok = true;
    for (alg, budget, want_quadratic) in [(Algorithm::Uniform, 150_000, true), (Algorithm::Rmed, 20_000, false)] {
        let report = match k_scaling(&RunSetup::new(alg), &refs, &cfg(budget), 7) {
            Ok(r) => r,
            Err(e) => return Outcome::Fail(format!("{}: {e}", alg.name())),
        };
        let identified = report.points.iter().all(|p| p.complexity.is_some());
        ok &= identified && report.fit.prefers_quadratic() == want_quadratic;
        let pts: Vec<String> = report.points.iter().map(|p| format!("{}:{}", p.k, fmt_cx(p.complexity))).collect();
        parts.push(format!(
            "{} [{}] rss lin {:.3e} quad {:.3e} -> {}",
            alg.name(),
            pts.join(" "),
            report.fit.linear.rss,
            report.fit.quadratic.rss,
            report.fit.preferred()
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(1200);
    verdict(ok, format!("{}; {:.0}s", parts.join("; "), elapsed.as_secs_f64()))
}

fn scored_manifest(source: &str, runs: &str) -> Manifest {
    let text = format!(
        r#"
schema_version = 1
name = "model-based"
master_seed = 11

[environment]
type = "scored"

[metric]
source = "{source}"

[config]
seeds = {SEEDS}
max_budget = 5000
checkpoint_stride = 10

{runs}
"#
    );
    Manifest::parse(&text).expect("valid manifest")
}

const MODEL_RUNS: &str = r#"
[[runs]]
label = "RMED"
algorithm = "RMED"

[[runs]]
label = "RMED+RandomMixing"
algorithm = "RMED"
policy = { policy = "random_mixing", p_m = 0.8 }

[[runs]]
label = "RMED+BALD"
algorithm = "RMED"
policy = { policy = "uncertainty_gated", measure = "BALD", threshold = 0.01 }
human_fraction = 0.2

[[runs]]
label = "RMED+UCB+BALD"
algorithm = "RMED"
policy = { policy = "uncertainty_gated", measure = "BALD", threshold = 0.01 }
human_fraction = 0.2
elimination = { alpha = 0.6, copeland_threshold = 0.8 }
"#;

/// Held-out three-way accuracy of the metric on the scored instance.
fn metric_accuracy(spec: &ScoredInstanceSpec) -> f64 {
    let inst = spec.build().expect("scored instance");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(99, 0, 0));
    let fit = inst.validation_pairs(2000, &mut rng);
    let rec = calibrate("metric", ProbabilityModelKind::Linear, &fit, BtlShift::MinToZero).expect("calibration");
    let model = rec.fitted();
    let held_out: Vec<(f64, _)> = inst
        .validation_pairs(5000, &mut rng)
        .iter()
        .map(|v| (model.probability(v.first, v.second), v.human))
        .collect();
    three_way_accuracy(&held_out, ThresholdPair { tau1: rec.tau1, tau2: rec.tau2 })
}

fn gate_model_based() -> Outcome {
    let start = Instant::now();
    let accuracy = metric_accuracy(&ScoredInstanceSpec::default());
    let good = match run_experiment(&scored_manifest("table", MODEL_RUNS)) {
        Ok(b) => b,
        Err(e) => return Outcome::Fail(format!("run failed: {e}")),
    };
    let random_runs = r#"
[[runs]]
label = "RMED"
algorithm = "RMED"

[[runs]]
label = "RMED+RandomMixing(33%)"
algorithm = "RMED"
policy = { policy = "random_mixing", p_m = 0.8 }
"#;
    let bad = match run_experiment(&scored_manifest("random", random_runs)) {
        Ok(b) => b,
        Err(e) => return Outcome::Fail(format!("run failed: {e}")),
    };
    let cx: Vec<Option<u64>> = good.summaries.iter().map(|s| s.complexity.last_crossing).collect();
    let [Some(base), Some(rm), Some(bald), Some(ucb)] = cx[..] else {
        return Outcome::Fail(format!("unidentified configuration: {cx:?}"));
    };
    let (Some(bad_base), Some(bad_rm)) = (bad.summaries[0].complexity.last_crossing, bad.summaries[1].complexity.last_crossing)
    else {
        return Outcome::Fail("random-metric run not identified".into());
    };
    let accuracy_ok = (accuracy - TARGET_ACCURACY).abs() <= ACCURACY_BAND;
    let ok = accuracy_ok
        && rm as f64 <= MODEL_GAIN * base as f64
        && bald as f64 <= MODEL_GAIN * base as f64
        && ucb <= base.min(rm).min(bald)
        && bad_rm >= bad_base;
    verdict(
        ok,
        format!(
            "metric accuracy {accuracy:.3}; humans to 95%: RMED {base}, +RM {rm}, +BALD {bald}, +UCB+BALD {ucb}; \
             33% metric: RMED {bad_base}, +RM {bad_rm}; {:.0}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

fn gate_elimination_safety() -> Outcome {
    let cfg = UcbEliminationConfig { alpha: 0.6, copeland_threshold: 0.8 };
    let fixtures = 200;
    let mut retained = 0;
    let mut survivors_total = 0;
    for seed in 0..fixtures {
        let spec = ScoredInstanceSpec { examples: 500, seed: 10_000 + seed, ..Default::default() };
        let inst = spec.build().expect("scored instance");
        let Some(truth) = inst.truth() else { continue };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let validation = inst.validation_pairs(1000, &mut rng);
        let model = calibrate("metric", ProbabilityModelKind::Linear, &validation, BtlShift::MinToZero)
            .expect("calibration")
            .fitted();
        let all: Vec<usize> = (0..spec.examples).collect();
        let report = ucb_eliminate(inst.table(), &model, cfg, |_, _| all.clone()).expect("elimination");
        survivors_total += report.survivors.len();
        if report.survived(truth.0) {
            retained += 1;
        }
    }
    verdict(
        retained >= MIN_RETAINED,
        format!(
            "winner kept in {retained}/{fixtures} fixtures (gate >= {MIN_RETAINED}); mean survivors {:.2} of {}",
            survivors_total as f64 / fixtures as f64,
            ScoredInstanceSpec::default().k
        ),
    )
}

fn gate_delay() -> Outcome {
    let src = reference();
    let mut values = Vec::new();
    let mut parts = Vec::new();
    for d in [0usize, 8, 16, 32] {
        let setup = RunSetup::new(Algorithm::Rmed).with_delay(d);
        let traces = run_seeds(&src, None, &setup, &cfg(10_000), 3, 0).expect("delayed run");
        let c = annotation_complexity(&traces, SystemId(K - 1), DELTA_ACC).expect("complexity");
        parts.push(format!("d={d}: {}", fmt_cx(c.last_crossing)));
        match c.last_crossing {
            Some(n) => values.push(n as f64),
            None => return Outcome::Fail(parts.join(", ")),
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
    let cv = sd / mean;
    verdict(cv <= MAX_DELAY_CV, format!("{}; CV {cv:.3} (gate <= {MAX_DELAY_CV})", parts.join(", ")))
}

fn gate_dataset() -> Outcome {
    let Ok(path) = std::env::var("ACTIVEVAL_WMT16_JUDGMENTS") else {
        return Outcome::Skip("set ACTIVEVAL_WMT16_JUDGMENTS to an ingested tur-eng judgment file".into());
    };
    let ds = match JudgmentDataset::load(&path) {
        Ok(d) => d,
        Err(e) => return Outcome::Fail(format!("{path}: {e}")),
    };
    let truth = match ds.truth() {
        Ok(t) => t,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let mut parts = vec![format!("{} judgments, {} systems", ds.len(), ds.k())];
    let mut ok = ds.check_coverage().is_ok();
    for (alg, lo, hi) in [(Algorithm::Uniform, 10_000, 40_000), (Algorithm::Rmed, 500, 8_000)] {
        let traces = match run_seeds(&ds, None, &RunSetup::new(alg), &cfg(60_000), 1, 0) {
            Ok(t) => t,
            Err(e) => return Outcome::Fail(e.to_string()),
        };
        let c = annotation_complexity(&traces, truth, DELTA_ACC).expect("complexity");
        ok &= c.last_crossing.is_some_and(|n| (lo..=hi).contains(&n));
        parts.push(format!("{} {} in [{lo}, {hi}]", alg.name(), fmt_cx(c.last_crossing)));
    }
    verdict(ok, parts.join("; "))
}

fn gate_determinism() -> Outcome {
    let manifest = Manifest::parse(
        r#"
schema_version = 1
name = "determinism"
master_seed = 42

[environment]
type = "scored"
k = 6
examples = 300

[metric]
source = "table"

[config]
seeds = 24
max_budget = 1500

[[runs]]
algorithm = "RMED"

[[runs]]
algorithm = "DTS++"
delay = 4

[[runs]]
label = "ucb-rm"
algorithm = "RUCB"
policy = { policy = "random_mixing", p_m = 0.5 }
elimination = { alpha = 0.6, copeland_threshold = 0.8 }
"#,
    )
    .expect("valid manifest");
    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        pool.install(|| run_experiment(&manifest)).expect("experiment")
    };
    let dir = tempfile::tempdir().expect("tempdir");
    let a = run_with(1);
    let b = run_with(4);
    a.write(&dir.path().join("a")).expect("write");
    b.write(&dir.path().join("b")).expect("write");
    let mut files_equal = true;
    for f in ["complexity.csv", "curves.csv", "traces/RMED.jsonl", "traces/DTS++.jsonl", "traces/ucb-rm.jsonl"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap_or_default();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap_or_default();
        files_equal &= !x.is_empty() && x == y;
    }
    let reports_equal = files_equal && a.traces == b.traces;

    // Service: scripted annotators, then a crash and a replay from disk.
    let data = tempfile::tempdir().expect("tempdir");
    let outputs: Vec<SystemOutputRecord> = (0..6)
        .flat_map(|s| {
            (0..20).map(move |e| SystemOutputRecord {
                system_id: format!("sys{s}"),
                example_id: format!("ex{e}"),
                text: format!("{s}"),
            })
        })
        .collect();
    let mut req = CreateSession::new(outputs, Algorithm::Rmed);
    req.seed = Some(5);
    let (id, before) = {
        let store = SessionStore::open(data.path()).expect("store");
        let id = store.create(req).expect("session");
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut pending: Vec<(u64, Choice)> = Vec::new();
        let snapshot = store
            .with(&id, |s| {
                for i in 0..600 {
                    if let NextTask::Task { task_id, left, right, .. } = s.next_task(&format!("a{}", i % 3))? {
                        let l: usize = left.text.parse().unwrap_or(0);
                        let r: usize = right.text.parse().unwrap_or(0);
                        let prefer_left = (l > r) == rng.random_bool(0.75);
                        pending.push((task_id, if prefer_left { Choice::Left } else { Choice::Right }));
                    }
                    if pending.len() > 2 {
                        let (t, c) = pending.remove(rng.random_range(0..pending.len()));
                        s.submit(&Submission { task_id: t, choice: c, annotator: None })?;
                    }
                }
                Ok((s.learner().clone(), s.counts().clone(), s.leaderboard(), s.log().to_vec()))
            })
            .expect("scripted session");
        (id, snapshot)
    };
    let recovered = SessionStore::open(data.path())
        .and_then(|store| store.with(&id, |s| Ok((s.learner().clone(), s.counts().clone(), s.leaderboard(), s.log().to_vec()))));
    let replay_equal = matches!(&recovered, Ok(after) if *after == before);
    verdict(
        reports_equal && replay_equal,
        format!(
            "reports byte-identical across 1 and 4 workers: {reports_equal}; session replay after restart ({} log records) exact: {replay_equal}",
            before.3.len()
        ),
    )
}

fn main() {
    let only: Option<Vec<u8>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: u8| only.as_ref().is_none_or(|o| o.contains(&id));
    let mut cache = Cache::default();
    let gates: Vec<(u8, &str, Box<dyn FnOnce(&mut Cache) -> Outcome>)> = vec![
        (1, "oracle equivalence", Box::new(|_| gate_oracles())),
        (2, "identification", Box::new(gate_identification)),
        (3, "efficiency", Box::new(gate_efficiency)),
        (4, "k-scaling", Box::new(|_| gate_scaling())),
        (5, "model-based gains", Box::new(|_| gate_model_based())),
        (6, "elimination safety", Box::new(|_| gate_elimination_safety())),
        (7, "delayed feedback", Box::new(|_| gate_delay())),
        (8, "dataset order of magnitude", Box::new(|_| gate_dataset())),
        (9, "determinism and recovery", Box::new(|_| gate_determinism())),
    ];
    let mut failed = 0;
    for (id, name, gate) in gates {
        if !wanted(id) {
            continue;
        }
        let (tag, detail) = match gate(&mut cache) {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {id} {name}: {detail}");
    }
    if failed > 0 {
        println!("{failed} acceptance gate(s) failed");
        std::process::exit(1);
    }
}
