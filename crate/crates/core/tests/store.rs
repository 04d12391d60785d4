mod common;

use std::fs;
use std::path::Path;

use common::*;
use proptest::prelude::*;
use robustune::coordinator::{run_experiment, RunOptions, SimulatedClock, TrialRecord};
use robustune::harness::{Failure, FailureStage, SyntheticTarget, TrialResult};
use robustune::model::{LevelTag, Role, StrategySpec};
use robustune::store::{self, Store, StoreError, LINKS_FILE};
use robustune::strategy::build_strategy;
use robustune::{serialize_experiment_description, Combination, ExperimentDescription, Factor, LevelValue};

fn factors() -> Vec<Factor> {
    vec![
        Factor::range("x", LevelTag::Int, 0.0, 4.0, 1.0, 1.0),
        Factor::enumeration("mode", vec![LevelValue::Text("a<b".into()), LevelValue::Text("c&d".into())]),
        Factor::range("load", LevelTag::Real, 0.5, 1.5, 0.5, 0.5).with_role(Role::Noise),
    ]
}

fn desc(fail: f64) -> ExperimentDescription {
    let mut m = metric(10.0);
    m.linear.push(("x".into(), 1.0));
    m.noise_sigma = 0.1;
    description(factors(), synthetic(m, fail, 5), StrategySpec::Random { budget: 10 }, 3)
}

fn run_into(dir: &Path, d: &ExperimentDescription) -> Store {
    let mut st = Store::create(dir, &serialize_experiment_description(d), "host: test\n").unwrap();
    let mut s = build_strategy(d).unwrap();
    let mut t = SyntheticTarget::new(match &d.target {
        robustune::model::TargetSpec::Synthetic(s) => s.clone(),
        _ => unreachable!(),
    });
    run_experiment(d, s.as_mut(), &mut t, &mut st, &mut SimulatedClock::new(2.0), 0, &RunOptions::default()).unwrap();
    st
}

#[test]
fn records_survive_a_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = desc(0.3);
    let st = run_into(dir.path(), &d);
    assert_eq!(st.len(), 10);
    assert!(st.records().iter().any(|r| !r.result.is_success()));
    let loaded = store::load(dir.path()).unwrap();
    assert_eq!(loaded.records, st.records());
    assert_eq!(loaded.description, d);
    assert!(loaded.warnings.is_empty());
    assert_eq!(fs::read_to_string(dir.path().join("envDescription.txt")).unwrap(), "host: test\n");
}

#[test]
fn links_resolve_both_ways() {
    let dir = tempfile::tempdir().unwrap();
    run_into(dir.path(), &desc(0.0));
    let links = fs::read_to_string(dir.path().join(LINKS_FILE)).unwrap();
    let configs = fs::read_to_string(dir.path().join("configs.xml")).unwrap();
    let doc = roxmltree::Document::parse(&links).unwrap();
    let cdoc = roxmltree::Document::parse(&configs).unwrap();
    let ids: Vec<&str> = cdoc.descendants().filter_map(|n| n.attribute("id")).collect();
    let used: Vec<&str> = doc.descendants().filter_map(|n| n.attribute("configuration")).collect();
    assert!(used.iter().all(|u| ids.contains(u)));
    // Every configuration entry is referenced by some trial.
    assert!(ids.iter().all(|i| used.contains(i)));
}

#[test]
fn torn_final_entry_is_dropped_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let st = run_into(dir.path(), &desc(0.0));
    let path = dir.path().join(LINKS_FILE);
    let text = fs::read_to_string(&path).unwrap();
    // Crash in the middle of writing the tenth link.
    let cut = text.rfind("  <trial").unwrap() + 20;
    fs::write(&path, &text[..cut]).unwrap();
    let loaded = store::load(dir.path()).unwrap();
    assert_eq!(loaded.records.len(), 9);
    assert_eq!(loaded.records, st.records()[..9]);
    assert_eq!(loaded.warnings.len(), 1);
    assert!(loaded.warnings[0].contains(LINKS_FILE));

    let (resumed, warnings) = Store::resume(dir.path()).unwrap();
    assert_eq!(resumed.len(), 9);
    assert_eq!(warnings.len(), 1);
    // The rewritten files read back cleanly.
    assert!(store::load(dir.path()).unwrap().warnings.is_empty());
}

#[test]
fn damage_before_the_last_entry_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    run_into(dir.path(), &desc(0.0));
    let path = dir.path().join(LINKS_FILE);
    let text = fs::read_to_string(&path).unwrap().replacen("<trial seq=\"3\"", "<trial seq=\"3", 1);
    fs::write(&path, text).unwrap();
    assert!(matches!(store::load(dir.path()), Err(StoreError::Corrupt { line: 6, .. })));
}

#[test]
fn create_refuses_an_existing_store() {
    let dir = tempfile::tempdir().unwrap();
    let d = desc(0.0);
    run_into(dir.path(), &d);
    assert!(matches!(
        Store::create(dir.path(), &serialize_experiment_description(&d), ""),
        Err(StoreError::Exists(_))
    ));
}

#[test]
fn appends_must_be_in_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let d = desc(0.0);
    let mut st = Store::create(dir.path(), &serialize_experiment_description(&d), "").unwrap();
    let r = record(3, TrialResult::Failure(Failure::new(FailureStage::Run, "x")), None);
    let e = robustune::coordinator::Recorder::append(&mut st, &r).unwrap_err();
    assert!(matches!(e, StoreError::Sequence { expected: 0, found: 3 }));
}

fn record(seq: u64, result: TrialResult, response: Option<f64>) -> TrialRecord {
    TrialRecord {
        sequence: seq,
        combination: Combination::from_levels(
            &factors(),
            &[LevelValue::Int(2), LevelValue::Text("c&d".into()), LevelValue::Real(1.0)],
        ),
        result,
        response,
        attempts: 1,
        timestamp: seq as f64,
    }
}

#[test]
fn export_marks_failed_metrics() {
    let d = desc(0.0);
    let ok = TrialResult::Success {
        metrics: vec![("Throughput".into(), 12.5)],
        wall_time: 1.0,
    };
    let bad = TrialResult::Failure(Failure::new(FailureStage::Timeout, "exceeded 60 s"));
    let tsv = store::export_tab_separated(&d, &[record(0, ok, Some(12.5)), record(1, bad, None)]);
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0], "x\tmode\tload\tThroughput");
    assert_eq!(lines[1], "2\tc&d\t1\t12.5");
    assert_eq!(lines[2], "2\tc&d\t1\tERROR");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn arbitrary_records_round_trip(
        values in prop::collection::vec((0i64..=4, any::<bool>(), 0usize..3, -1e6f64..1e6, any::<bool>(), 1u32..4), 1..15),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let d = desc(0.0);
        let mut st = Store::create(dir.path(), &serialize_experiment_description(&d), "").unwrap();
        let mut written = Vec::new();
        for (i, (x, mode, load, y, ok, attempts)) in values.into_iter().enumerate() {
            let mode = LevelValue::Text(if mode { "a<b" } else { "c&d" }.into());
            let load = LevelValue::Real([0.5, 1.0, 1.5][load]);
            let result = if ok {
                TrialResult::Success { metrics: vec![("Throughput".into(), y)], wall_time: 0.25 }
            } else {
                TrialResult::Failure(Failure::new(FailureStage::Protocol, format!("bad line \"{y}\" <&>")))
            };
            let r = TrialRecord {
                sequence: i as u64,
                combination: Combination::from_levels(&factors(), &[LevelValue::Int(x), mode, load]),
                response: ok.then_some(y / 3.0),
                result,
                attempts,
                timestamp: i as f64 * 1.5,
            };
            robustune::coordinator::Recorder::append(&mut st, &r).unwrap();
            written.push(r);
        }
        let loaded = store::load(dir.path()).unwrap();
        prop_assert_eq!(loaded.records, written);
    }
}
