//! The experiment loop: ask the strategy, validate, adapt, run, recover, record.

use std::time::{Duration, Instant};

use crate::harness::{recover, Failure, FailureStage, RecoverDecision, Target, TrialContext, TrialResult};
use crate::model::{AggregationMode, AggregationSpec, Combination, ExperimentDescription, Factor};
use crate::store::StoreError;
use crate::strategy::{Strategy, StrategyError};

/// Detail text of the error record written for a rejected configuration.
pub const INVALID_CONFIGURATION: &str = "Invalid configuration";

/// One executed (or rejected) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub sequence: u64,
    pub combination: Combination,
    pub result: TrialResult,
    /// Aggregated, normalized response; present exactly when the trial succeeded.
    pub response: Option<f64>,
    /// Run attempts made, 0 when the trial never reached the run stage.
    pub attempts: u32,
    /// Seconds since the experiment started, taken after the trial.
    pub timestamp: f64,
}

/// Where trial records go.
pub trait Recorder {
    fn append(&mut self, record: &TrialRecord) -> Result<(), StoreError>;
}

impl Recorder for Vec<TrialRecord> {
    fn append(&mut self, record: &TrialRecord) -> Result<(), StoreError> {
        self.push(record.clone());
        Ok(())
    }
}

/// Experiment time source. Seconds since the experiment started.
pub trait Clock {
    fn now(&self) -> f64;
    /// Waits for a target to settle after an adaptation.
    fn wait(&mut self, seconds: f64);
    /// Accounts for a finished run attempt.
    fn charge(&mut self, result: &TrialResult);
}

/// Wall-clock time, offset so a resumed experiment continues its timeline.
pub struct SystemClock {
    origin: Instant,
    offset: f64,
}

impl SystemClock {
    pub fn new() -> SystemClock {
        SystemClock::starting_at(0.0)
    }

    pub fn starting_at(offset: f64) -> SystemClock {
        SystemClock {
            origin: Instant::now(),
            offset,
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        self.offset + self.origin.elapsed().as_secs_f64()
    }

    fn wait(&mut self, seconds: f64) {
        if seconds > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(seconds));
        }
    }

    fn charge(&mut self, _result: &TrialResult) {}
}

/// Deterministic time: successes cost their reported wall time, failures a fixed cost.
#[derive(Debug, Clone)]
pub struct SimulatedClock {
    pub time: f64,
    pub failure_cost: f64,
}

impl SimulatedClock {
    pub fn new(failure_cost: f64) -> SimulatedClock {
        SimulatedClock { time: 0.0, failure_cost }
    }
}

impl Clock for SimulatedClock {
    fn now(&self) -> f64 {
        self.time
    }

    fn wait(&mut self, seconds: f64) {
        self.time += seconds.max(0.0);
    }

    fn charge(&mut self, result: &TrialResult) {
        self.time += match result {
            TrialResult::Success { wall_time, .. } => *wall_time,
            TrialResult::Failure(_) => self.failure_cost,
        };
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CoordinatorError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("stored trial {sequence} does not match the strategy's replayed plan: stored {stored}, expected {expected}")]
    ReplayMismatch {
        sequence: u64,
        stored: String,
        expected: String,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    /// Stop after this many new trials, as if interrupted.
    pub trial_limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub trials: usize,
    pub failures: usize,
    pub elapsed: f64,
    /// The time budget ran out before the strategy finished.
    pub budget_stop: bool,
    /// The trial limit was hit before the strategy finished.
    pub interrupted: bool,
}

/// Combines a successful result's metrics into the response.
pub fn aggregate_response(result: &TrialResult, agg: &AggregationSpec) -> Result<f64, Failure> {
    let TrialResult::Success { metrics, .. } = result else {
        return Err(Failure::new(FailureStage::Protocol, "no metrics to aggregate"));
    };
    let get = |name: &str| {
        metrics
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Failure::new(FailureStage::Protocol, format!("missing metric {name}")))
    };
    let raw = match &agg.mode {
        AggregationMode::SingleMetric(m) => get(m)?,
        AggregationMode::WeightedSum(terms) => {
            let mut s = 0.0;
            for (m, w) in terms {
                s += w * get(m)?;
            }
            s
        }
    };
    let y = match agg.normalizer {
        Some(a) => raw / a,
        None => raw,
    };
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Failure::new(FailureStage::Protocol, format!("response {y} is not finite")))
    }
}

/// Applies the levels of `next` that differ from `current`: noise factors first,
/// then control factors, each in declaration order. Returns the number of
/// adaptations made.
pub fn change_combination(
    current: Option<&Combination>,
    next: &Combination,
    factors: &[Factor],
    target: &mut dyn Target,
    clock: &mut dyn Clock,
) -> Result<usize, Failure> {
    let mut applied = 0;
    for group in [&next.condition, &next.configuration] {
        for (name, level) in group {
            if current.and_then(|c| c.get(name)) == Some(level) {
                continue;
            }
            let f = factors
                .iter()
                .find(|f| f.name == *name)
                .ok_or_else(|| Failure::new(FailureStage::Adapt, format!("unknown factor {name}")))?;
            target.apply_level(f, level)?;
            clock.wait(f.time_to_adapt.seconds());
            applied += 1;
        }
    }
    Ok(applied)
}

/// Runs the trial, recovering and retrying until success or the recovery bound.
/// Returns the final result and the number of run attempts.
pub fn execute_with_recovery(
    target: &mut dyn Target,
    combination: &Combination,
    sequence: u64,
    max_recovers: u32,
    deadline: Duration,
    clock: &mut dyn Clock,
) -> (TrialResult, u32) {
    let mut attempt = 0u32;
    loop {
        let r = target.run_trial(combination, TrialContext { sequence, attempt }, deadline);
        clock.charge(&r);
        attempt += 1;
        let TrialResult::Failure(f) = &r else { return (r, attempt) };
        log::warn!("trial {sequence} attempt {attempt} failed: {f}");
        match recover(target, attempt - 1, max_recovers) {
            RecoverDecision::Retry => continue,
            RecoverDecision::Abandon(None) => return (r, attempt),
            RecoverDecision::Abandon(Some(rf)) => {
                let detail = format!("{}; {}", f.detail, rf.detail);
                return (TrialResult::Failure(Failure::new(f.stage, detail)), attempt);
            }
        }
    }
}

/// Feeds stored records back into a freshly built strategy so it reaches the
/// state it had when they were written.
pub fn replay(strategy: &mut dyn Strategy, records: &[TrialRecord]) -> Result<(), CoordinatorError> {
    for r in records {
        let expected = strategy.next_combination()?;
        if expected.as_ref() != Some(&r.combination) {
            return Err(CoordinatorError::ReplayMismatch {
                sequence: r.sequence,
                stored: r.combination.to_string(),
                expected: expected.map_or("nothing".into(), |c| c.to_string()),
            });
        }
        strategy.record_result(&r.combination, r.response)?;
    }
    Ok(())
}

/// Executes the experiment loop until the strategy finishes, the time budget is
/// spent, or the trial limit is reached. `first_sequence` is the number of
/// records already stored.
pub fn run_experiment(
    desc: &ExperimentDescription,
    strategy: &mut dyn Strategy,
    target: &mut dyn Target,
    recorder: &mut dyn Recorder,
    clock: &mut dyn Clock,
    first_sequence: u64,
    options: &RunOptions,
) -> Result<Summary, CoordinatorError> {
    let started = clock.now();
    let budget = desc.resources.time_limit.seconds();
    let deadline = Duration::from_secs_f64(desc.trial_timeout.seconds());
    let mut current: Option<Combination> = None;
    let mut sequence = first_sequence;
    let mut summary = Summary {
        trials: 0,
        failures: 0,
        elapsed: 0.0,
        budget_stop: false,
        interrupted: false,
    };
    while !strategy.is_finished() {
        if clock.now() >= budget {
            summary.budget_stop = true;
            log::info!("time budget of {budget} s spent");
            break;
        }
        if options.trial_limit.is_some_and(|l| summary.trials >= l) {
            summary.interrupted = true;
            break;
        }
        let Some(c) = strategy.next_combination()? else { break };
        let (result, attempts) = match target.validate(&c) {
            Ok(false) => (
                TrialResult::Failure(Failure::new(FailureStage::Validate, INVALID_CONFIGURATION)),
                0,
            ),
            Err(f) => (TrialResult::Failure(f), 0),
            Ok(true) => match change_combination(current.as_ref(), &c, &desc.factors, target, clock) {
                Err(f) => {
                    // Partially applied; the target state is unknown.
                    current = None;
                    (TrialResult::Failure(f), 0)
                }
                Ok(_) => {
                    current = Some(c.clone());
                    execute_with_recovery(target, &c, sequence, desc.max_recovers, deadline, clock)
                }
            },
        };
        let (result, response) = match &result {
            TrialResult::Success { .. } => match aggregate_response(&result, &desc.aggregation) {
                Ok(y) => (result, Some(y)),
                Err(f) => (TrialResult::Failure(f), None),
            },
            TrialResult::Failure(_) => (result, None),
        };
        if response.is_none() {
            summary.failures += 1;
        }
        let record = TrialRecord {
            sequence,
            combination: c.clone(),
            result,
            response,
            attempts,
            timestamp: clock.now(),
        };
        recorder.append(&record)?;
        strategy.record_result(&c, response)?;
        sequence += 1;
        summary.trials += 1;
    }
    summary.elapsed = clock.now() - started;
    Ok(summary)
}
