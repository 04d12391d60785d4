mod common;

use std::fs;
use std::time::Duration;

use common::*;
use proptest::prelude::*;
use robustune::coordinator::{
    replay, run_experiment, CoordinatorError, RunOptions, SimulatedClock, TrialRecord, INVALID_CONFIGURATION,
};
use robustune::harness::{Failure, FailureStage, SyntheticTarget, Target, TrialContext, TrialResult};
use robustune::model::{AnnealSettings, LevelTag, Role, StrategySpec, TimeSpec};
use robustune::store::LINKS_FILE;
use robustune::strategy::build_strategy;
use robustune::{Combination, ExperimentDescription, Factor, LevelValue};

/// Logs every call made on the wrapped target.
struct Logged<T> {
    inner: T,
    events: Vec<String>,
    fail_apply: Option<String>,
}

impl<T: Target> Logged<T> {
    fn new(inner: T) -> Logged<T> {
        Logged { inner, events: Vec::new(), fail_apply: None }
    }
}

impl<T: Target> Target for Logged<T> {
    fn apply_level(&mut self, factor: &Factor, level: &LevelValue) -> Result<(), Failure> {
        self.events.push(format!("apply {}={level}", factor.name));
        if self.fail_apply.as_deref() == Some(&factor.name) {
            return Err(Failure::new(FailureStage::Adapt, "refused"));
        }
        self.inner.apply_level(factor, level)
    }

    fn validate(&mut self, c: &Combination) -> Result<bool, Failure> {
        self.events.push("validate".into());
        self.inner.validate(c)
    }

    fn run_trial(&mut self, c: &Combination, ctx: TrialContext, deadline: Duration) -> TrialResult {
        self.events.push(format!("run {}.{}", ctx.sequence, ctx.attempt));
        self.inner.run_trial(c, ctx, deadline)
    }

    fn recover(&mut self) -> Result<(), Failure> {
        self.events.push("recover".into());
        self.inner.recover()
    }
}

fn factors() -> Vec<Factor> {
    vec![
        Factor::range("x", LevelTag::Int, 0.0, 5.0, 1.0, 1.0),
        Factor::range("y", LevelTag::Int, 0.0, 2.0, 1.0, 1.0),
        Factor::range("load", LevelTag::Int, 1.0, 2.0, 1.0, 1.0).with_role(Role::Noise),
    ]
}

fn desc(fail: f64, strategy: StrategySpec) -> ExperimentDescription {
    let mut m = metric(20.0);
    m.linear.push(("x".into(), 1.0));
    m.noise_sigma = 0.5;
    description(factors(), synthetic(m, fail, 11), strategy, 4)
}

fn target(d: &ExperimentDescription) -> SyntheticTarget {
    synthetic_target(d)
}

fn run(d: &ExperimentDescription, t: &mut dyn Target) -> Vec<TrialRecord> {
    let mut s = build_strategy(d).unwrap();
    let mut out = Vec::new();
    run_experiment(d, s.as_mut(), t, &mut out, &mut SimulatedClock::new(3.0), 0, &RunOptions::default()).unwrap();
    out
}

fn runs_per_sequence(events: &[String], seq: u64) -> usize {
    events.iter().filter(|e| e.starts_with(&format!("run {seq}."))).count()
}

#[test]
fn one_record_per_combination_and_bounded_retries() {
    let d = desc(0.4, StrategySpec::Grid { replications: 2 });
    let mut t = Logged::new(target(&d));
    let records = run(&d, &mut t);
    // 6 x 3 configurations, 2 conditions, 2 replications.
    assert_eq!(records.len(), 72);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r.sequence, i as u64);
        assert!((1..=2).contains(&r.attempts));
        assert_eq!(runs_per_sequence(&t.events, r.sequence), r.attempts as usize);
        assert_eq!(r.response.is_some(), r.result.is_success());
    }
    let retried = records.iter().filter(|r| r.attempts == 2).count();
    let failed = records.iter().filter(|r| !r.result.is_success()).count();
    assert!(retried > 0 && failed > 0 && failed < retried);
    assert_eq!(t.inner.recoveries, retried + failed);
}

#[test]
fn invalid_configurations_are_recorded_without_adaptation() {
    let d = desc(0.0, StrategySpec::Grid { replications: 1 });
    let inner = target(&d).with_validator(|c| c.get("x") != Some(&LevelValue::Int(3)));
    let mut t = Logged::new(inner);
    let records = run(&d, &mut t);
    assert_eq!(records.len(), 36);
    let invalid: Vec<&TrialRecord> = records.iter().filter(|r| r.combination.get("x") == Some(&LevelValue::Int(3))).collect();
    assert_eq!(invalid.len(), 6);
    for r in invalid {
        let TrialResult::Failure(f) = &r.result else { panic!("trial {} ran", r.sequence) };
        assert_eq!(f.stage, FailureStage::Validate);
        assert_eq!(f.detail, INVALID_CONFIGURATION);
        assert_eq!(r.attempts, 0);
        assert_eq!(runs_per_sequence(&t.events, r.sequence), 0);
    }
    // Each validate that says no is followed directly by the next validate.
    let validates: Vec<usize> = t.events.iter().enumerate().filter(|(_, e)| *e == "validate").map(|(i, _)| i).collect();
    for (k, r) in records.iter().enumerate() {
        if r.attempts == 0 {
            let next = t.events.get(validates[k] + 1);
            assert!(next.is_none() || next == Some(&"validate".to_string()));
        }
    }
    assert!(t.inner.adaptations.iter().all(|(n, v)| !(n == "x" && *v == LevelValue::Int(3))));
}

#[test]
fn only_changed_levels_are_applied() {
    let d = desc(0.0, StrategySpec::Grid { replications: 1 });
    let mut t = Logged::new(target(&d));
    let records = run(&d, &mut t);
    let mut expected = 3;
    for w in records.windows(2) {
        let (a, b) = (&w[0].combination, &w[1].combination);
        expected += ["x", "y", "load"].iter().filter(|n| a.get(n) != b.get(n)).count();
    }
    assert_eq!(t.inner.adaptations.len(), expected);
    assert!(expected < 3 * records.len());
    // Noise levels go first.
    assert_eq!(t.events[1], "apply load=1");
}

#[test]
fn failed_adaptation_forces_full_reapplication() {
    let d = desc(0.0, StrategySpec::Grid { replications: 1 });
    let mut t = Logged::new(target(&d));
    t.fail_apply = Some("y".into());
    let records = run(&d, &mut t);
    assert!(records.iter().all(|r| matches!(&r.result, TrialResult::Failure(f) if f.stage == FailureStage::Adapt)));
    // With no known state, every trial starts from scratch.
    assert_eq!(t.events.iter().filter(|e| e.starts_with("apply load")).count(), records.len());
}

#[test]
fn time_budget_stops_the_loop() {
    let mut d = desc(0.0, StrategySpec::Grid { replications: 5 });
    d.resources.time_limit = TimeSpec::secs(10.0);
    let mut s = build_strategy(&d).unwrap();
    let mut out = Vec::new();
    let summary =
        run_experiment(&d, s.as_mut(), &mut target(&d), &mut out, &mut SimulatedClock::new(3.0), 0, &RunOptions::default())
            .unwrap();
    assert!(summary.budget_stop);
    assert_eq!(out.len(), 10);
    assert_eq!(summary.elapsed, 10.0);
}

#[test]
fn replay_detects_a_foreign_store() {
    let d = desc(0.0, StrategySpec::Random { budget: 8 });
    let records = run(&d, &mut target(&d));
    let mut other = d.clone();
    other.seed += 1;
    let mut s = build_strategy(&other).unwrap();
    assert!(matches!(replay(s.as_mut(), &records), Err(CoordinatorError::ReplayMismatch { .. })));
}

/// Interrupts after `k` trials, optionally tearing a further half-written link,
/// then resumes and compares every file with an uninterrupted run.
fn resume_matches(d: &ExperimentDescription, k: usize, torn: bool) -> Result<(), TestCaseError> {
    let whole = tempfile::tempdir().unwrap();
    run_stored(whole.path(), d, None);
    let cut = tempfile::tempdir().unwrap();
    run_stored(cut.path(), d, Some(k));
    if torn {
        // An append truncates the closing tag before writing its line.
        let path = cut.path().join(LINKS_FILE);
        let text = fs::read_to_string(&path).unwrap();
        let body = text.strip_suffix("</links>\n").unwrap();
        fs::write(&path, format!("{body}  <trial seq=\"99\" configur")).unwrap();
    }
    resume_stored(cut.path(), d);
    prop_assert_eq!(snapshot(whole.path()), snapshot(cut.path()));
    Ok(())
}

#[test]
fn resume_reconstructs_the_store_byte_for_byte() {
    let d = desc(0.3, StrategySpec::Random { budget: 25 });
    resume_matches(&d, 10, false).unwrap();
    resume_matches(&d, 10, true).unwrap();
    let sa = StrategySpec::Annealing(AnnealSettings {
        start: None,
        budget: 30,
        initial_temperature: None,
        cooling: 0.95,
        span: 2,
    });
    resume_matches(&desc(0.2, sa), 17, true).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn resume_at_any_point(k in 0usize..20, torn: bool, seed in 0u64..1000) {
        let mut d = desc(0.3, StrategySpec::Random { budget: 20 });
        d.seed = seed;
        resume_matches(&d, k, torn)?;
    }

    #[test]
    fn attempts_never_exceed_the_bound(p in 0.0f64..0.9, max_recovers in 0u32..4, seed in 0u64..1000) {
        let mut d = desc(p, StrategySpec::Random { budget: 30 });
        d.max_recovers = max_recovers;
        d.seed = seed;
        let records = run(&d, &mut target(&d));
        prop_assert_eq!(records.len(), 30);
        for r in &records {
            prop_assert!(r.attempts >= 1 && r.attempts <= max_recovers + 1);
            if !r.result.is_success() {
                prop_assert_eq!(r.attempts, max_recovers + 1);
            }
        }
    }
}
