//! Search strategies: which combination to test next.

mod annealing;
mod grid;
mod hill_climb;
mod random;
mod sequence;
mod taguchi;

use std::cmp::Ordering;

pub use annealing::{acceptance_probability, SimulatedAnnealing};
pub use grid::GridStrategy;
pub use hill_climb::HillClimb;
pub use random::RandomStrategy;
pub use sequence::SequenceStrategy;
pub use taguchi::{default_level_map, PhaseAnalysis, TaguchiStrategy};

use crate::doe::DesignError;
use crate::model::{
    enumerate_levels, Combination, ExperimentDescription, Factor, LevelDomain, LevelValue, Role, StrategySpec,
    GRANULE_TOLERANCE,
};
use crate::stats::StatsError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StrategyError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("invalid strategy settings: {0}")]
    Invalid(String),
    #[error("strategy contract violated: {0}")]
    Contract(String),
}

/// The search contract. `record_result` is called exactly once for every issued
/// combination, before the next call to `next_combination`. A `None` response
/// means the trial failed.
pub trait Strategy: Send {
    fn name(&self) -> &'static str;

    fn next_combination(&mut self) -> Result<Option<Combination>, StrategyError>;

    fn record_result(&mut self, combination: &Combination, response: Option<f64>) -> Result<(), StrategyError>;

    fn is_finished(&self) -> bool;

    /// Highest response recorded so far.
    fn best(&self) -> Option<(Combination, f64)>;

    /// What the strategy would hand on: its final answer, or the best point seen.
    fn recommendation(&self) -> Option<Combination> {
        self.best().map(|(c, _)| c)
    }

    /// Named tab-separated tables describing the strategy's internal state.
    fn report(&self) -> Vec<(String, String)> {
        Vec::new()
    }
}

/// Tracks the best (combination, response) pair; ties keep the earlier one.
#[derive(Debug, Clone, Default)]
pub(crate) struct Best(Option<(Combination, f64)>);

impl Best {
    pub fn offer(&mut self, c: &Combination, y: Option<f64>) {
        if let Some(y) = y {
            if self.0.as_ref().map_or(true, |(_, b)| y > *b) {
                self.0 = Some((c.clone(), y));
            }
        }
    }

    pub fn get(&self) -> Option<(Combination, f64)> {
        self.0.clone()
    }
}

/// Checks that `c` is the combination the strategy issued last.
pub(crate) fn expect_pending(pending: &mut Option<Combination>, c: &Combination) -> Result<(), StrategyError> {
    match pending.take() {
        Some(p) if p == *c => Ok(()),
        Some(p) => Err(StrategyError::Contract(format!("result for {c} while {p} was pending"))),
        None => Err(StrategyError::Contract(format!("result for {c} with nothing pending"))),
    }
}

/// Moves `level` by `k` sample granules (ranges) or `k` positions (enumerations),
/// clamped to the domain.
pub fn step_level(factor: &Factor, level: &LevelValue, k: i64) -> LevelValue {
    match &factor.domain {
        LevelDomain::Enumeration { levels, .. } => {
            let i = levels.iter().position(|l| l == level).unwrap_or(0) as i64;
            levels[(i + k).clamp(0, levels.len() as i64 - 1) as usize].clone()
        }
        LevelDomain::Range {
            tag,
            lower,
            upper,
            legal_granularity,
            sample_granularity,
        } => {
            let v = level.as_f64().unwrap_or(*lower) + k as f64 * sample_granularity;
            let v = v.clamp(*lower, *upper);
            // Keep the value exactly on the legal lattice.
            let n = ((v - lower) / legal_granularity).round();
            let v = (lower + n * legal_granularity).clamp(*lower, *upper);
            let v = if (v - upper).abs() <= GRANULE_TOLERANCE * legal_granularity { *upper } else { v };
            LevelValue::from_f64(*tag, v).unwrap_or_else(|| level.clone())
        }
    }
}

/// Start point for local searches: explicit levels where given, otherwise each
/// factor's first sampled level.
pub fn start_combination(
    factors: &[Factor],
    start: Option<&[(String, LevelValue)]>,
) -> Result<Combination, StrategyError> {
    let mut levels = Vec::with_capacity(factors.len());
    for f in factors {
        let given = start.and_then(|s| s.iter().find(|(n, _)| *n == f.name)).map(|(_, v)| v.clone());
        let l = match given {
            Some(v) => v,
            None => enumerate_levels(f)
                .into_iter()
                .next()
                .ok_or_else(|| StrategyError::Invalid(format!("{} has no levels", f.name)))?,
        };
        levels.push(l);
    }
    let c = Combination::from_levels(factors, &levels);
    c.check(factors).map_err(|e| StrategyError::Invalid(format!("start point: {e}")))?;
    Ok(c)
}

/// Neighbours of `c` one step away in a single control factor, excluding `c`.
pub(crate) fn neighbours(factors: &[Factor], c: &Combination) -> Vec<Combination> {
    let mut out = Vec::new();
    for f in factors.iter().filter(|f| f.role == Role::Control) {
        let cur = c.get(&f.name).expect("complete combination");
        for k in [-1, 1] {
            let l = step_level(f, cur, k);
            if l != *cur {
                let mut n = c.clone();
                n.set(&f.name, l);
                if !out.contains(&n) {
                    out.push(n);
                }
            }
        }
    }
    out
}

pub(crate) fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}

/// Builds the strategy described by `desc`.
pub fn build_strategy(desc: &ExperimentDescription) -> Result<Box<dyn Strategy>, StrategyError> {
    build_from_spec(&desc.strategy, desc, desc.seed, None)
}

pub(crate) fn build_from_spec(
    spec: &StrategySpec,
    desc: &ExperimentDescription,
    seed: u64,
    handoff: Option<&Combination>,
) -> Result<Box<dyn Strategy>, StrategyError> {
    let factors = desc.factors.clone();
    let start_of = |explicit: &Option<Vec<(String, LevelValue)>>| -> Option<Vec<(String, LevelValue)>> {
        match (explicit, handoff) {
            (Some(s), _) => Some(s.clone()),
            (None, Some(h)) => Some(h.configuration.iter().chain(&h.condition).cloned().collect()),
            (None, None) => None,
        }
    };
    Ok(match spec {
        StrategySpec::Grid { replications } => Box::new(GridStrategy::new(&factors, *replications, seed)?),
        StrategySpec::Random { budget } => Box::new(RandomStrategy::new(&factors, *budget, seed)),
        StrategySpec::HillClimb { start, budget } => {
            let s = start_combination(&factors, start_of(start).as_deref())?;
            Box::new(HillClimb::new(&factors, s, *budget, seed))
        }
        StrategySpec::Annealing(a) => {
            let s = start_combination(&factors, start_of(&a.start).as_deref())?;
            Box::new(SimulatedAnnealing::new(&factors, s, a, seed)?)
        }
        StrategySpec::Taguchi(t) => Box::new(TaguchiStrategy::new(&factors, t.clone(), seed)?),
        StrategySpec::Sequence { budget, steps } => Box::new(SequenceStrategy::new(desc.clone(), steps.clone(), *budget, seed)?),
    })
}
