//! Deterministic synthetic target driven by a declared response function.

use std::f64::consts::PI;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Failure, FailureStage, Target, TrialContext, TrialResult};
use crate::model::{Combination, Factor, LevelValue, SyntheticMetric, SyntheticTargetSpec};

type Validator = Box<dyn FnMut(&Combination) -> bool + Send>;

fn value_of(c: &Combination, name: &str) -> Result<f64, Failure> {
    c.get(name)
        .and_then(LevelValue::as_f64)
        .ok_or_else(|| Failure::new(FailureStage::Run, format!("no numeric level for {name}")))
}

fn ground_truth(m: &SyntheticMetric, c: &Combination) -> Result<f64, Failure> {
    let mut y = m.intercept;
    for (f, b) in &m.linear {
        y += b * value_of(c, f)?;
    }
    for (f, b) in &m.quadratic {
        let x = value_of(c, f)?;
        y += b * x * x;
    }
    for (f, g, b) in &m.interaction {
        y += b * value_of(c, f)? * value_of(c, g)?;
    }
    for s in &m.steps {
        if value_of(c, &s.factor)? > s.threshold {
            y += s.offset;
        }
    }
    Ok(y)
}

/// Evaluates the synthetic response for `combination`.
///
/// All randomness comes from one ChaCha stream selected by `draw_index`: the first
/// uniform decides the injected failure, then two uniforms per metric feed a
/// Box–Muller normal.
pub fn synthetic_evaluate(spec: &SyntheticTargetSpec, combination: &Combination, draw_index: u64) -> TrialResult {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(draw_index);
    let u: f64 = rng.gen();
    if u < spec.fail_probability {
        return TrialResult::Failure(Failure::new(FailureStage::Run, "injected"));
    }
    let mut metrics = Vec::with_capacity(spec.metrics.len());
    for m in &spec.metrics {
        let y = match ground_truth(m, combination) {
            Ok(y) => y,
            Err(f) => return TrialResult::Failure(f),
        };
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let z = (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos();
        metrics.push((m.name.clone(), y + m.noise_sigma * z));
    }
    TrialResult::Success {
        metrics,
        wall_time: spec.trial_seconds,
    }
}

/// In-process target evaluating a [`SyntheticTargetSpec`]. Records every adaptation
/// and recovery so callers can inspect what was done to it.
pub struct SyntheticTarget {
    spec: SyntheticTargetSpec,
    validator: Option<Validator>,
    pub adaptations: Vec<(String, LevelValue)>,
    pub recoveries: usize,
    pub trials: usize,
}

impl SyntheticTarget {
    pub fn new(spec: SyntheticTargetSpec) -> SyntheticTarget {
        SyntheticTarget {
            spec,
            validator: None,
            adaptations: Vec::new(),
            recoveries: 0,
            trials: 0,
        }
    }

    /// Declares which configurations are legal; all are by default.
    pub fn with_validator(mut self, v: impl FnMut(&Combination) -> bool + Send + 'static) -> SyntheticTarget {
        self.validator = Some(Box::new(v));
        self
    }

    pub fn spec(&self) -> &SyntheticTargetSpec {
        &self.spec
    }
}

impl Target for SyntheticTarget {
    fn apply_level(&mut self, factor: &Factor, level: &LevelValue) -> Result<(), Failure> {
        self.adaptations.push((factor.name.clone(), level.clone()));
        Ok(())
    }

    fn validate(&mut self, configuration: &Combination) -> Result<bool, Failure> {
        Ok(self.validator.as_mut().map_or(true, |v| v(configuration)))
    }

    fn run_trial(&mut self, combination: &Combination, ctx: TrialContext, _deadline: Duration) -> TrialResult {
        self.trials += 1;
        synthetic_evaluate(&self.spec, combination, ctx.draw_index())
    }

    fn recover(&mut self) -> Result<(), Failure> {
        self.recoveries += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StepTerm;

    fn spec(m: SyntheticMetric) -> SyntheticTargetSpec {
        SyntheticTargetSpec {
            metrics: vec![m],
            fail_probability: 0.0,
            seed: 7,
            trial_seconds: 1.0,
        }
    }

    fn combo(x: i64) -> Combination {
        Combination {
            configuration: vec![("x1".into(), LevelValue::Int(x))],
            condition: vec![],
        }
    }

    #[test]
    fn linear_is_exact() {
        let s = spec(SyntheticMetric {
            name: "y".into(),
            linear: vec![("x1".into(), 1.0)],
            ..Default::default()
        });
        assert_eq!(synthetic_evaluate(&s, &combo(7), 0).metric("y"), Some(7.0));
    }

    #[test]
    fn step_offset() {
        let s = spec(SyntheticMetric {
            name: "y".into(),
            intercept: 10.0,
            steps: vec![StepTerm {
                factor: "x1".into(),
                threshold: 50.0,
                offset: -5.0,
            }],
            ..Default::default()
        });
        assert_eq!(synthetic_evaluate(&s, &combo(49), 3).metric("y"), Some(10.0));
        assert_eq!(synthetic_evaluate(&s, &combo(51), 3).metric("y"), Some(5.0));
    }

    #[test]
    fn noise_is_keyed_by_draw() {
        let s = spec(SyntheticMetric {
            name: "y".into(),
            noise_sigma: 1.0,
            ..Default::default()
        });
        let a = synthetic_evaluate(&s, &combo(1), 11);
        assert_eq!(a, synthetic_evaluate(&s, &combo(1), 11));
        assert_ne!(a, synthetic_evaluate(&s, &combo(1), 12));
    }
}
