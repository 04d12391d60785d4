//! Driving the system under test: adaptation, validation, trial runs and recovery.

pub mod command;
pub mod synthetic;

use std::fmt;
use std::time::Duration;

use crate::model::{Combination, ExperimentDescription, Factor, LevelValue, TargetSpec};

pub use command::CommandTarget;
pub use synthetic::{synthetic_evaluate, SyntheticTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureStage {
    Adapt,
    Validate,
    Run,
    Timeout,
    Protocol,
}

impl FailureStage {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureStage::Adapt => "adapt",
            FailureStage::Validate => "validate",
            FailureStage::Run => "run",
            FailureStage::Timeout => "timeout",
            FailureStage::Protocol => "protocol",
        }
    }

    pub fn parse(s: &str) -> Option<FailureStage> {
        Some(match s {
            "adapt" => FailureStage::Adapt,
            "validate" => FailureStage::Validate,
            "run" => FailureStage::Run,
            "timeout" => FailureStage::Timeout,
            "protocol" => FailureStage::Protocol,
            _ => return None,
        })
    }
}

impl fmt::Display for FailureStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub stage: FailureStage,
    pub detail: String,
}

impl Failure {
    pub fn new(stage: FailureStage, detail: impl Into<String>) -> Failure {
        Failure {
            stage,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialResult {
    /// One value per declared metric, in declaration order.
    Success { metrics: Vec<(String, f64)>, wall_time: f64 },
    Failure(Failure),
}

impl TrialResult {
    pub fn is_success(&self) -> bool {
        matches!(self, TrialResult::Success { .. })
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        match self {
            TrialResult::Success { metrics, .. } => metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v),
            TrialResult::Failure(_) => None,
        }
    }
}

/// Identifies a run attempt; synthetic draws are keyed on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialContext {
    pub sequence: u64,
    pub attempt: u32,
}

impl TrialContext {
    /// Counter used for seeded draws, unique per (sequence, attempt).
    pub fn draw_index(&self) -> u64 {
        (self.sequence << 16) | self.attempt as u64
    }
}

/// The target wrapper: every call is one external action on the system under test.
pub trait Target {
    fn apply_level(&mut self, factor: &Factor, level: &LevelValue) -> Result<(), Failure>;

    /// `Ok(false)` for an illegal configuration.
    fn validate(&mut self, configuration: &Combination) -> Result<bool, Failure>;

    fn run_trial(&mut self, combination: &Combination, ctx: TrialContext, deadline: Duration) -> TrialResult;

    /// Runs the recovery action, if any.
    fn recover(&mut self) -> Result<(), Failure>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecoverDecision {
    Retry,
    Abandon(Option<Failure>),
}

/// Restores the target after a failure, then decides whether to try again:
/// abandon once `consecutive_attempts` has reached `max_recovers`.
pub fn recover(target: &mut dyn Target, consecutive_attempts: u32, max_recovers: u32) -> RecoverDecision {
    if let Err(f) = target.recover() {
        return RecoverDecision::Abandon(Some(f));
    }
    if consecutive_attempts >= max_recovers {
        RecoverDecision::Abandon(None)
    } else {
        RecoverDecision::Retry
    }
}

/// Parses `name<TAB>value` lines into values ordered as `metrics`.
pub fn parse_metric_lines(output: &str, metrics: &[String]) -> Result<Vec<(String, f64)>, Failure> {
    let mut values: Vec<Option<f64>> = vec![None; metrics.len()];
    for line in output.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (name, value) = line
            .split_once('\t')
            .ok_or_else(|| Failure::new(FailureStage::Protocol, format!("malformed line {line:?}")))?;
        let i = metrics
            .iter()
            .position(|m| m == name)
            .ok_or_else(|| Failure::new(FailureStage::Protocol, format!("unexpected metric {name:?}")))?;
        let v: f64 = value
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Failure::new(FailureStage::Protocol, format!("bad value {value:?} for {name}")))?;
        if values[i].replace(v).is_some() {
            return Err(Failure::new(FailureStage::Protocol, format!("duplicate metric {name}")));
        }
    }
    let missing: Vec<&str> = metrics
        .iter()
        .zip(&values)
        .filter(|(_, v)| v.is_none())
        .map(|(m, _)| m.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Failure::new(
            FailureStage::Protocol,
            format!("missing metric {}", missing.join(", ")),
        ));
    }
    Ok(metrics.iter().cloned().zip(values.into_iter().flatten()).collect())
}

/// Target declared by the description.
pub fn build_target(desc: &ExperimentDescription) -> Box<dyn Target> {
    match &desc.target {
        TargetSpec::Commands { run, recover, validate } => Box::new(CommandTarget {
            run: run.template(false),
            recover: recover.as_ref().map(|c| c.template(false)),
            validate: validate.as_ref().map(|c| c.template(false)),
            metrics: desc.metrics.clone(),
        }),
        TargetSpec::Synthetic(s) => Box::new(SyntheticTarget::new(s.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn metric_lines_any_order() {
        let m = parse_metric_lines("Fetch\t123.4\nRcpt\t88.0\n", &names(&["Rcpt", "Fetch"])).unwrap();
        assert_eq!(m, vec![("Rcpt".into(), 88.0), ("Fetch".into(), 123.4)]);
    }

    #[test]
    fn metric_line_errors() {
        let ms = names(&["Fetch", "Rcpt"]);
        let e = parse_metric_lines("Fetch\t1\n", &ms).unwrap_err();
        assert_eq!(e.stage, FailureStage::Protocol);
        assert!(e.detail.contains("Rcpt"));
        assert!(parse_metric_lines("Fetch\t1\nFetch\t2\nRcpt\t1\n", &ms).is_err());
        assert!(parse_metric_lines("Fetch\t1\nRcpt\tx\n", &ms).is_err());
        assert!(parse_metric_lines("Fetch\t1\nRcpt\t1\nOther\t1\n", &ms).is_err());
    }

    struct Stub(bool);

    impl Target for Stub {
        fn apply_level(&mut self, _: &Factor, _: &LevelValue) -> Result<(), Failure> {
            Ok(())
        }
        fn validate(&mut self, _: &Combination) -> Result<bool, Failure> {
            Ok(true)
        }
        fn run_trial(&mut self, _: &Combination, _: TrialContext, _: Duration) -> TrialResult {
            TrialResult::Failure(Failure::new(FailureStage::Run, "x"))
        }
        fn recover(&mut self) -> Result<(), Failure> {
            if self.0 {
                Ok(())
            } else {
                Err(Failure::new(FailureStage::Run, "recovery failed"))
            }
        }
    }

    #[test]
    fn recovery_bound() {
        assert_eq!(recover(&mut Stub(true), 1, 1), RecoverDecision::Abandon(None));
        assert_eq!(recover(&mut Stub(true), 0, 1), RecoverDecision::Retry);
        assert_eq!(recover(&mut Stub(true), 2, 5), RecoverDecision::Retry);
        assert!(matches!(recover(&mut Stub(false), 0, 5), RecoverDecision::Abandon(Some(_))));
    }
}
