#![allow(dead_code)]

pub mod tables;

use std::fs;
use std::path::Path;
use std::time::Duration;

use robustune::coordinator::{replay, run_experiment, RunOptions, SimulatedClock};
use robustune::harness::{synthetic_evaluate, SyntheticTarget, Failure, FailureStage, Target, TrialContext, TrialResult};
use robustune::model::{
    AggregationMode, AggregationSpec, LevelTag, Resources, StepTerm, StrategySpec, SyntheticMetric, SyntheticTargetSpec,
    TargetSpec, TimeSpec,
};
use robustune::stats::{snr_larger_better, Observations, Term};
use robustune::store::Store;
use robustune::strategy::{build_strategy, Strategy};
use robustune::{serialize_experiment_description, Combination, ExperimentDescription, Factor, LevelValue};

pub use tables::{PHASE1_ROWS, PHASE2_ROWS};

pub const TNE_LEVELS: [i64; 3] = [10_000, 30_000, 50_000];
pub const MAXLDAP_LEVELS: [i64; 3] = [100, 1001, 2000];
pub const LDAPNUM_LEVELS: [i64; 3] = [1, 2, 4];
// Coded DispNum levels are not in ascending order.
pub const DISPNUM_LEVELS: [i64; 3] = [5, 2, 8];

/// TNE in 10^4, MaxLDAP in 10^3, the others unscaled.
pub const PHASE1_SCALING: [f64; 4] = [1e4, 1e3, 1.0, 1.0];
pub const PHASE2_SCALING: [f64; 3] = [1e4, 1e3, 1.0];

pub fn directory_factors() -> Vec<Factor> {
    vec![
        Factor::range("TNE", LevelTag::Int, 10_000.0, 60_000.0, 10.0, 10_000.0),
        Factor::range("MaxLDAP", LevelTag::Int, 1.0, 2001.0, 1.0, 100.0),
        Factor::range("LDAPnum", LevelTag::Int, 1.0, 4.0, 1.0, 1.0),
        Factor::range("DispNum", LevelTag::Int, 1.0, 10.0, 1.0, 1.0),
    ]
}

pub fn phase1_levels(coded: [u8; 4]) -> [i64; 4] {
    let i = coded.map(|c| c as usize - 1);
    [TNE_LEVELS[i[0]], MAXLDAP_LEVELS[i[1]], LDAPNUM_LEVELS[i[2]], DISPNUM_LEVELS[i[3]]]
}

pub fn phase1_observations() -> Observations {
    Observations {
        factors: ["TNE", "MaxLDAP", "LDAPnum", "DispNum"].map(String::from).to_vec(),
        rows: PHASE1_ROWS
            .iter()
            .map(|(c, _, _)| phase1_levels(*c).iter().map(|&v| v as f64).collect())
            .collect(),
        response: PHASE1_ROWS.iter().map(|(_, y, _)| snr_larger_better(y).unwrap()).collect(),
    }
}

/// Linear and quadratic terms for every factor plus the three interactions
/// involving MaxLDAP.
pub fn phase1_terms() -> Vec<Term> {
    let mut t = vec![Term::Intercept];
    t.extend((0..4).map(Term::Linear));
    t.extend((0..4).map(Term::Quadratic));
    t.extend([Term::Interaction(0, 1), Term::Interaction(1, 2), Term::Interaction(1, 3)]);
    t
}

pub fn phase2_observations() -> Observations {
    Observations {
        factors: ["TNE", "MaxLDAP", "DispNum"].map(String::from).to_vec(),
        rows: PHASE2_ROWS.iter().map(|(x, _, _)| x.iter().map(|&v| v as f64).collect()).collect(),
        response: PHASE2_ROWS.iter().map(|(_, y, _)| snr_larger_better(y).unwrap()).collect(),
    }
}

pub fn phase2_terms() -> Vec<Term> {
    let mut t = vec![Term::Intercept];
    t.extend((0..3).map(Term::Linear));
    t.extend((0..3).map(Term::Quadratic));
    t.extend([Term::Interaction(0, 1), Term::Interaction(0, 2), Term::Interaction(1, 2)]);
    t
}

/// Answers trials from a table of recorded replicates, cycling through them per
/// configuration.
pub struct ReplayTarget {
    pub metric: String,
    pub rows: Vec<(Vec<(String, LevelValue)>, Vec<f64>, usize)>,
    pub adaptations: usize,
}

impl ReplayTarget {
    pub fn new(metric: &str, rows: Vec<(Vec<(String, LevelValue)>, Vec<f64>)>) -> ReplayTarget {
        ReplayTarget {
            metric: metric.to_string(),
            rows: rows.into_iter().map(|(c, y)| (c, y, 0)).collect(),
            adaptations: 0,
        }
    }

    pub fn phase1() -> ReplayTarget {
        let names = ["TNE", "MaxLDAP", "LDAPnum", "DispNum"];
        let rows = PHASE1_ROWS
            .iter()
            .map(|(c, y, _)| {
                let cfg = names
                    .iter()
                    .zip(phase1_levels(*c))
                    .map(|(n, v)| (n.to_string(), LevelValue::Int(v)))
                    .collect();
                (cfg, y.to_vec())
            })
            .collect();
        ReplayTarget::new("Throughput", rows)
    }
}

impl Target for ReplayTarget {
    fn apply_level(&mut self, _factor: &Factor, _level: &LevelValue) -> Result<(), Failure> {
        self.adaptations += 1;
        Ok(())
    }

    fn validate(&mut self, _configuration: &Combination) -> Result<bool, Failure> {
        Ok(true)
    }

    fn run_trial(&mut self, combination: &Combination, _ctx: TrialContext, _deadline: Duration) -> TrialResult {
        let Some(row) = self.rows.iter_mut().find(|r| r.0 == combination.configuration) else {
            return TrialResult::Failure(Failure::new(FailureStage::Run, format!("no recorded result for {combination}")));
        };
        let y = row.1[row.2 % row.1.len()];
        row.2 += 1;
        TrialResult::Success {
            metrics: vec![(self.metric.clone(), y)],
            wall_time: 1.0,
        }
    }

    fn recover(&mut self) -> Result<(), Failure> {
        Ok(())
    }
}

pub fn metric(intercept: f64) -> SyntheticMetric {
    SyntheticMetric {
        name: "Throughput".into(),
        intercept,
        ..SyntheticMetric::default()
    }
}

pub fn synthetic(metric: SyntheticMetric, fail_probability: f64, seed: u64) -> SyntheticTargetSpec {
    SyntheticTargetSpec {
        metrics: vec![metric],
        fail_probability,
        seed,
        trial_seconds: 1.0,
    }
}

/// A description driving a synthetic target with one metric, `Throughput`.
pub fn description(factors: Vec<Factor>, target: SyntheticTargetSpec, strategy: StrategySpec, seed: u64) -> ExperimentDescription {
    ExperimentDescription {
        factors,
        metrics: vec!["Throughput".into()],
        target: TargetSpec::Synthetic(target),
        resources: Resources {
            time_limit: TimeSpec::secs(1e9),
            machines: Vec::new(),
        },
        trial_timeout: TimeSpec::secs(60.0),
        max_recovers: 1,
        seed,
        strategy,
        aggregation: AggregationSpec {
            mode: AggregationMode::SingleMetric("Throughput".into()),
            normalizer: None,
        },
    }
}

pub fn int(v: i64) -> LevelValue {
    LevelValue::Int(v)
}

/// Runs `s` to completion, answering with `f`; returns every issued combination.
pub fn drive(s: &mut dyn Strategy, mut f: impl FnMut(&Combination) -> Option<f64>) -> Vec<Combination> {
    let mut out = Vec::new();
    while !s.is_finished() {
        let Some(c) = s.next_combination().unwrap() else { break };
        let y = f(&c);
        s.record_result(&c, y).unwrap();
        out.push(c);
        assert!(out.len() < 100_000, "runaway strategy");
    }
    out
}

/// Peaks of 7 at x = 10 and 11 at x = 30, with 1 at x = 0, 20 and 40.
pub fn two_peaks() -> SyntheticMetric {
    let mut steps = Vec::new();
    for k in 0..10 {
        let t = k as f64 + 0.5;
        steps.push(StepTerm { factor: "x".into(), threshold: t, offset: 0.6 });
        steps.push(StepTerm { factor: "x".into(), threshold: t + 10.0, offset: -0.6 });
        steps.push(StepTerm { factor: "x".into(), threshold: t + 20.0, offset: 1.0 });
        steps.push(StepTerm { factor: "x".into(), threshold: t + 30.0, offset: -1.0 });
    }
    SyntheticMetric {
        steps,
        ..metric(1.0)
    }
}

pub fn surface(m: SyntheticMetric) -> impl FnMut(&Combination) -> Option<f64> {
    let spec = synthetic(m, 0.0, 1);
    move |c| synthetic_evaluate(&spec, c, 0).metric("Throughput")
}

/// `top - curvature * |x - peak|^2`.
pub fn bowl(factors: &[Factor], peak: &[f64], curvature: f64, top: f64) -> SyntheticMetric {
    let mut m = metric(top);
    for (f, p) in factors.iter().zip(peak) {
        m.linear.push((f.name.clone(), 2.0 * curvature * p));
        m.quadratic.push((f.name.clone(), -curvature));
        m.intercept -= curvature * p * p;
    }
    m
}

pub fn synthetic_target(d: &ExperimentDescription) -> SyntheticTarget {
    match &d.target {
        TargetSpec::Synthetic(s) => SyntheticTarget::new(s.clone()),
        TargetSpec::Commands { .. } => panic!("not a synthetic description"),
    }
}

/// Every file in `dir` with its bytes, sorted by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

/// Runs `d` on its synthetic target into a new store, stopping after `limit` trials.
pub fn run_stored(dir: &Path, d: &ExperimentDescription, limit: Option<usize>) {
    let mut st = Store::create(dir, &serialize_experiment_description(d), "env\n").unwrap();
    let mut s = build_strategy(d).unwrap();
    let opts = RunOptions { trial_limit: limit };
    run_experiment(d, s.as_mut(), &mut synthetic_target(d), &mut st, &mut SimulatedClock::new(3.0), 0, &opts).unwrap();
}

/// Resumes the store in `dir` and runs the experiment to its end.
pub fn resume_stored(dir: &Path, d: &ExperimentDescription) {
    let (mut st, _) = Store::resume(dir).unwrap();
    let done = st.records().to_vec();
    let mut s = build_strategy(d).unwrap();
    replay(s.as_mut(), &done).unwrap();
    let mut clock = SimulatedClock::new(3.0);
    clock.time = done.last().map_or(0.0, |r| r.timestamp);
    run_experiment(d, s.as_mut(), &mut synthetic_target(d), &mut st, &mut clock, done.len() as u64, &RunOptions::default())
        .unwrap();
}
