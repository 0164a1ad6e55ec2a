use activeval::environment::SystemOutputRecord;
use activeval::learners::Algorithm;
use activeval::metric::ScoreRecord;
use activeval::model_based::{FeedbackPolicy, RandomMixingConfig, UcbEliminationConfig};
use activeval::preference::{Verdict, WinCountMatrix};
use activeval::probability::{CalibrationRecord, ScorePreprocessor};
use activeval_service::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn outputs(k: usize, n: usize) -> Vec<SystemOutputRecord> {
    let mut v = Vec::new();
    for s in 0..k {
        for e in 0..n {
            v.push(SystemOutputRecord { system_id: format!("sys{s}"), example_id: format!("ex{e}"), text: format!("sys{s}|ex{e}") });
        }
    }
    v
}

fn request(k: usize, n: usize, algorithm: Algorithm) -> CreateSession {
    let mut r = CreateSession::new(outputs(k, n), algorithm);
    r.seed = Some(11);
    r
}

fn system_of(text: &str) -> usize {
    text.split('|').next().unwrap()[3..].parse().unwrap()
}

fn task(next: NextTask) -> (u64, usize, usize) {
    match next {
        NextTask::Task { task_id, left, right, .. } => (task_id, system_of(&left.text), system_of(&right.text)),
        NextTask::Done { .. } => panic!("session is not active"),
    }
}

/// Annotator that prefers the higher-numbered system with probability `p`.
fn answer(left: usize, right: usize, p: f64, rng: &mut ChaCha8Rng) -> Choice {
    let left_better = left > right;
    if rng.random_bool(p) == left_better {
        Choice::Left
    } else {
        Choice::Right
    }
}

#[test]
fn two_systems_have_one_pair() {
    let store = SessionStore::in_memory();
    let id = store.create(request(2, 10, Algorithm::Rmed)).unwrap();
    store
        .with(&id, |s| {
            assert_eq!(s.status(), SessionStatus::Active);
            for _ in 0..20 {
                let (_, l, r) = task(s.next_task("a")?);
                assert_eq!(l + r, 1);
            }
            Ok(())
        })
        .unwrap();
}

#[test]
fn malformed_outputs_report_line() {
    let mut r = request(2, 2, Algorithm::Uniform);
    r.outputs = OutputsPayload::Jsonl(
        "{\"system_id\":\"a\",\"example_id\":\"e\",\"text\":\"x\"}\n{\"system_id\":\"b\",\"example_id\":}\n".into(),
    );
    let err = SessionStore::in_memory().create(r).unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn missing_outputs_are_rejected() {
    let mut records = outputs(3, 4);
    records.pop();
    let err = SessionStore::in_memory().create(CreateSession::new(records, Algorithm::Rmed)).unwrap_err();
    assert!(matches!(err, ServiceError::Environment(_)), "{err}");
}

fn metric(k: usize, n: usize, score: impl Fn(usize) -> f64) -> LiveMetric {
    let mut scores = Vec::new();
    for s in 0..k {
        for e in 0..n {
            let base = score(s);
            scores.push(ScoreRecord {
                system_id: format!("sys{s}"),
                example_id: format!("ex{e}"),
                score: base,
                samples: Some(vec![base; 4]),
            });
        }
    }
    LiveMetric {
        scores,
        calibration: CalibrationRecord {
            metric: "m".into(),
            preprocessor: ScorePreprocessor::Linear { delta: 1.0 },
            tau1: 0.45,
            tau2: 0.55,
            validation_accuracy: 1.0,
            non_informative: false,
        },
    }
}

#[test]
fn single_survivor_starts_converged() {
    let k = 3;
    let mut r = request(k, 5, Algorithm::Rmed);
    r.metric = Some(metric(k, 5, |s| if s == 2 { 0.9 } else { 0.1 }));
    r.elimination = Some(UcbEliminationConfig { alpha: 0.6, copeland_threshold: 0.8 });
    let store = SessionStore::in_memory();
    let id = store.create(r).unwrap();
    store
        .with(&id, |s| {
            assert_eq!(s.status(), SessionStatus::Converged);
            assert_eq!(s.info().survivors, vec!["sys2".to_string()]);
            match s.next_task("a")? {
                NextTask::Done { recommendation, .. } => assert_eq!(recommendation, "sys2"),
                t => panic!("expected terminal response, got {t:?}"),
            }
            assert_eq!(s.human_annotations(), 0);
            assert!(s.log().is_empty());
            Ok(())
        })
        .unwrap();
}

#[test]
fn metric_answers_are_logged_and_replayed() {
    let k = 4;
    let mut r = request(k, 8, Algorithm::Rmed);
    r.metric = Some(metric(k, 8, |s| s as f64 / 4.0));
    r.policy = FeedbackPolicy::RandomMixing(RandomMixingConfig::new(0.8).unwrap());
    let store = SessionStore::in_memory();
    let id = store.create(r).unwrap();
    store
        .with(&id, |s| {
            for _ in 0..50 {
                let (t, _, _) = task(s.next_task("a")?);
                s.submit(&Submission { task_id: t, choice: Choice::Tie, annotator: None })?;
            }
            assert_eq!(s.human_annotations(), 50);
            assert!(s.model_feedback() > 100, "{}", s.model_feedback());
            let models = s.log().iter().filter(|r| matches!(r.event, Event::Model { .. })).count() as u64;
            assert_eq!(models, s.model_feedback());
            let replayed = Session::replay(s.header().clone(), s.log().to_vec())?;
            assert_eq!(replayed.learner(), s.learner());
            assert_eq!(replayed.leaderboard(), s.leaderboard());
            Ok(())
        })
        .unwrap();
}

#[test]
fn model_policy_without_metric_is_rejected() {
    let mut r = request(3, 4, Algorithm::Rmed);
    r.policy = FeedbackPolicy::RandomMixing(RandomMixingConfig::new(0.5).unwrap());
    assert!(matches!(SessionStore::in_memory().create(r), Err(ServiceError::Invalid(_))));
}

#[test]
fn swapped_left_choice_is_a_loss() {
    let store = SessionStore::in_memory();
    let id = store.create(request(2, 10, Algorithm::Uniform)).unwrap();
    store
        .with(&id, |s| {
            loop {
                let (t, _, _) = task(s.next_task("a")?);
                let swapped = s.outstanding().find(|x| x.id == t).unwrap().swapped;
                let resp = s.submit(&Submission { task_id: t, choice: Choice::Left, annotator: None })?;
                if swapped {
                    assert_eq!(resp.outcome, Verdict::Loss);
                    return Ok(());
                }
                assert_eq!(resp.outcome, Verdict::Win);
            }
        })
        .unwrap();
}

#[test]
fn duplicate_submission_changes_nothing() {
    let store = SessionStore::in_memory();
    let id = store.create(request(3, 10, Algorithm::Rmed)).unwrap();
    store
        .with(&id, |s| {
            let (t, _, _) = task(s.next_task("a")?);
            s.submit(&Submission { task_id: t, choice: Choice::Tie, annotator: None })?;
            let before = (s.log().len(), s.counts().clone(), s.learner().clone());
            let err = s.submit(&Submission { task_id: t, choice: Choice::Left, annotator: None }).unwrap_err();
            assert!(matches!(err, ServiceError::DuplicateTask(_)));
            assert!(matches!(
                s.submit(&Submission { task_id: 999, choice: Choice::Left, annotator: None }).unwrap_err(),
                ServiceError::UnknownTask(999)
            ));
            assert_eq!(before, (s.log().len(), s.counts().clone(), s.learner().clone()));
            Ok(())
        })
        .unwrap();
}

#[test]
fn concurrent_annotators_get_distinct_tasks() {
    let store = SessionStore::in_memory();
    let id = store.create(request(4, 10, Algorithm::Rucb)).unwrap();
    let ids: Vec<u64> = ["a", "b", "c"]
        .iter()
        .map(|a| store.with(&id, |s| Ok(task(s.next_task(a)?).0)).unwrap())
        .collect();
    assert_eq!(ids.len(), 3);
    assert!(ids[0] != ids[1] && ids[1] != ids[2] && ids[0] != ids[2]);
    store
        .with(&id, |s| {
            assert_eq!(s.outstanding().count(), 3);
            // Answer out of order.
            for &t in ids.iter().rev() {
                s.submit(&Submission { task_id: t, choice: Choice::Right, annotator: None })?;
            }
            assert_eq!(s.human_annotations(), 3);
            assert_eq!(s.outstanding().count(), 0);
            Ok(())
        })
        .unwrap();
}

#[test]
fn leaderboard_matches_offline_replay() {
    let store = SessionStore::in_memory();
    let id = store.create(request(4, 20, Algorithm::Rmed)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let board = store
        .with(&id, |s| {
            for _ in 0..100 {
                let (t, l, r) = task(s.next_task("a")?);
                let choice = answer(l, r, 0.7, &mut rng);
                s.submit(&Submission { task_id: t, choice, annotator: None })?;
            }
            Ok(s.leaderboard())
        })
        .unwrap();
    let log = store.with(&id, |s| Ok(s.log().to_vec())).unwrap();
    let mut counts = WinCountMatrix::new(4);
    let mut humans = 0;
    for rec in &log {
        if let Event::Judgment { first, second, outcome, .. } = rec.event {
            counts.record(first, second, outcome).unwrap();
            humans += 1;
        }
    }
    assert_eq!(humans, 100);
    assert_eq!(board.human_annotations, 100);
    let mut p = board.pairs.iter();
    for i in 0..4 {
        for j in (i + 1)..4 {
            let pc = p.next().unwrap();
            assert_eq!(pc.comparisons, counts.trials(i, j));
            assert_eq!(pc.p_hat, counts.p_hat(i, j));
        }
    }
}

#[test]
fn presentation_order_is_balanced() {
    let store = SessionStore::in_memory();
    let id = store.create(request(3, 10, Algorithm::Uniform)).unwrap();
    let n = 10_000;
    store
        .with(&id, |s| {
            for _ in 0..n {
                s.next_task("a")?;
            }
            let swaps = s.outstanding().filter(|t| t.swapped).count();
            let frac = swaps as f64 / n as f64;
            assert!((frac - 0.5).abs() <= 0.02, "swap fraction {frac}");
            Ok(())
        })
        .unwrap();
}

#[test]
fn stable_recommendation_converges() {
    let mut r = request(2, 5, Algorithm::Rmed);
    r.stopping_window = 30;
    let store = SessionStore::in_memory();
    let id = store.create(r).unwrap();
    store
        .with(&id, |s| {
            let mut n = 0;
            while let NextTask::Task { task_id, left, .. } = s.next_task("a")? {
                let choice = if system_of(&left.text) == 1 { Choice::Left } else { Choice::Right };
                s.submit(&Submission { task_id, choice, annotator: None })?;
                n += 1;
                assert!(n < 1000);
            }
            assert_eq!(s.status(), SessionStatus::Converged);
            assert_eq!(s.leaderboard().recommendation, "sys1");
            Ok(())
        })
        .unwrap();
}

#[test]
fn budget_exhausts_session() {
    let mut r = request(3, 5, Algorithm::Uniform);
    r.budget = Some(7);
    let store = SessionStore::in_memory();
    let id = store.create(r).unwrap();
    store
        .with(&id, |s| {
            while let NextTask::Task { task_id, .. } = s.next_task("a")? {
                s.submit(&Submission { task_id, choice: Choice::Tie, annotator: None })?;
            }
            assert_eq!(s.status(), SessionStatus::Exhausted);
            assert_eq!(s.human_annotations(), 7);
            Ok(())
        })
        .unwrap();
}

#[test]
fn recovery_from_disk_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (id, learner, counts, log, outstanding) = {
        let store = SessionStore::open(dir.path()).unwrap();
        let id = store.create(request(5, 30, Algorithm::DtsPlusPlus)).unwrap();
        store
            .with(&id, |s| {
                let mut pending = Vec::new();
                for i in 0..300 {
                    let (t, l, r) = task(s.next_task(&format!("ann{}", i % 3))?);
                    pending.push((t, answer(l, r, 0.8, &mut rng)));
                    if i % 4 != 3 {
                        let (t, c) = pending.remove(0);
                        s.submit(&Submission { task_id: t, choice: c, annotator: None })?;
                    }
                }
                let out: Vec<Task> = s.outstanding().cloned().collect();
                Ok((s.id().to_string(), s.learner().clone(), s.counts().clone(), s.log().to_vec(), out))
            })
            .unwrap()
    };
    // Simulate a crash mid-write.
    let log_path = dir.path().join(&id).join("log.jsonl");
    let mut text = std::fs::read_to_string(&log_path).unwrap();
    text.push_str("{\"seq\":99999,\"times");
    std::fs::write(&log_path, text).unwrap();

    let store = SessionStore::open(dir.path()).unwrap();
    store
        .with(&id, |s| {
            assert_eq!(s.learner(), &learner);
            assert_eq!(s.counts(), &counts);
            assert_eq!(s.log(), log.as_slice());
            assert_eq!(s.outstanding().cloned().collect::<Vec<_>>(), outstanding);
            // The recovered session keeps going and keeps its log appendable.
            let (t, _, _) = task(s.next_task("late")?);
            s.submit(&Submission { task_id: t, choice: Choice::Tie, annotator: None })?;
            Ok(())
        })
        .unwrap();
    drop(store);
    let again = SessionStore::open(dir.path()).unwrap();
    assert_eq!(again.with(&id, |s| Ok(s.log().len())).unwrap(), log.len() + 2);
}

#[test]
fn tampered_log_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let store = SessionStore::open(dir.path()).unwrap();
        let id = store.create(request(4, 10, Algorithm::Rmed)).unwrap();
        store
            .with(&id, |s| {
                for _ in 0..5 {
                    let (t, _, _) = task(s.next_task("a")?);
                    s.submit(&Submission { task_id: t, choice: Choice::Left, annotator: None })?;
                }
                Ok(())
            })
            .unwrap();
        id
    };
    let path = dir.path().join(&id).join("log.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let tampered = if text.contains("\"swapped\":false") {
        text.replacen("\"swapped\":false", "\"swapped\":true", 1)
    } else {
        text.replacen("\"swapped\":true", "\"swapped\":false", 1)
    };
    std::fs::write(&path, tampered).unwrap();
    assert!(matches!(SessionStore::open(dir.path()), Err(ServiceError::Replay { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn replay_reproduces_live_state(
        seed in any::<u64>(),
        ops in proptest::collection::vec((0u8..4, 0u8..3), 1..120),
        alg in prop::sample::select(vec![Algorithm::Rmed, Algorithm::Rucb, Algorithm::Ccb, Algorithm::Knockout, Algorithm::Savage]),
    ) {
        let mut r = request(4, 6, alg);
        r.seed = Some(seed);
        let store = SessionStore::in_memory();
        let id = store.create(r).unwrap();
        store.with(&id, |s| {
            let mut pending: Vec<u64> = Vec::new();
            for (op, c) in &ops {
                let choice = [Choice::Left, Choice::Right, Choice::Tie][*c as usize];
                match op {
                    0 | 1 => if let NextTask::Task { task_id, .. } = s.next_task("p")? { pending.push(task_id) },
                    2 if !pending.is_empty() => {
                        let t = pending.remove(pending.len() / 2);
                        s.submit(&Submission { task_id: t, choice, annotator: None })?;
                    }
                    _ => {
                        if let Some(&t) = pending.first() {
                            pending.remove(0);
                            s.submit(&Submission { task_id: t, choice, annotator: None })?;
                            // A duplicate is always rejected.
                            assert!(s.submit(&Submission { task_id: t, choice, annotator: None }).is_err());
                        }
                    }
                }
            }
            let humans = s.log().iter().filter(|r| matches!(r.event, Event::Judgment { .. })).count() as u64;
            assert_eq!(humans, s.human_annotations());
            let replayed = Session::replay(s.header().clone(), s.log().to_vec())?;
            assert_eq!(replayed.learner(), s.learner());
            assert_eq!(replayed.counts(), s.counts());
            assert_eq!(replayed.leaderboard(), s.leaderboard());
            Ok(())
        }).unwrap();
    }
}
