use super::{build_from_spec, Best, Strategy, StrategyError};
use crate::model::{Combination, ExperimentDescription, StrategySpec};

/// Runs strategies in order. Each one starts from the previous one's
/// recommendation; element `i` is seeded with `seed + i`.
pub struct SequenceStrategy {
    desc: ExperimentDescription,
    steps: Vec<StrategySpec>,
    budget: Option<usize>,
    seed: u64,
    index: usize,
    current: Box<dyn Strategy>,
    issued: usize,
    recorded: usize,
    pending: bool,
    best: Best,
    done_reports: Vec<(String, String)>,
    exhausted: bool,
}

impl SequenceStrategy {
    pub fn new(
        desc: ExperimentDescription,
        steps: Vec<StrategySpec>,
        budget: Option<usize>,
        seed: u64,
    ) -> Result<SequenceStrategy, StrategyError> {
        let first = steps
            .first()
            .ok_or_else(|| StrategyError::Invalid("sequence has no strategies".into()))?;
        let current = build_from_spec(first, &desc, seed, None)?;
        let mut s = SequenceStrategy {
            desc,
            steps,
            budget,
            seed,
            index: 0,
            current,
            issued: 0,
            recorded: 0,
            pending: false,
            best: Best::default(),
            done_reports: Vec::new(),
            exhausted: false,
        };
        s.advance()?;
        Ok(s)
    }

    /// Index of the strategy currently running.
    pub fn position(&self) -> usize {
        self.index
    }

    fn retire(&mut self) {
        let prefix = format!("step{}_{}_", self.index + 1, self.current.name());
        for (n, t) in self.current.report() {
            self.done_reports.push((format!("{prefix}{n}"), t));
        }
    }

    /// Moves past finished strategies.
    fn advance(&mut self) -> Result<(), StrategyError> {
        while self.current.is_finished() && !self.exhausted {
            self.start_next()?;
        }
        Ok(())
    }

    fn start_next(&mut self) -> Result<(), StrategyError> {
        self.retire();
        if self.index + 1 >= self.steps.len() {
            self.exhausted = true;
            return Ok(());
        }
        let handoff = self.current.recommendation().or_else(|| self.best.get().map(|(c, _)| c));
        self.index += 1;
        self.current = build_from_spec(
            &self.steps[self.index],
            &self.desc,
            self.seed.wrapping_add(self.index as u64),
            handoff.as_ref(),
        )?;
        Ok(())
    }

    fn out_of_budget(&self) -> bool {
        self.budget.is_some_and(|b| self.issued >= b)
    }
}

impl Strategy for SequenceStrategy {
    fn name(&self) -> &'static str {
        "sequence"
    }

    fn next_combination(&mut self) -> Result<Option<Combination>, StrategyError> {
        if self.pending {
            return Err(StrategyError::Contract("previous result not recorded".into()));
        }
        loop {
            if self.exhausted || self.out_of_budget() {
                return Ok(None);
            }
            match self.current.next_combination()? {
                Some(c) => {
                    self.issued += 1;
                    self.pending = true;
                    return Ok(Some(c));
                }
                None => self.start_next()?,
            }
        }
    }

    fn record_result(&mut self, combination: &Combination, response: Option<f64>) -> Result<(), StrategyError> {
        if !self.pending {
            return Err(StrategyError::Contract(format!("result for {combination} with nothing pending")));
        }
        self.pending = false;
        self.current.record_result(combination, response)?;
        self.recorded += 1;
        self.best.offer(combination, response);
        self.advance()
    }

    fn is_finished(&self) -> bool {
        !self.pending && (self.exhausted || self.out_of_budget())
    }

    fn best(&self) -> Option<(Combination, f64)> {
        self.best.get()
    }

    fn recommendation(&self) -> Option<Combination> {
        self.current.recommendation().or_else(|| self.best.get().map(|(c, _)| c))
    }

    fn report(&self) -> Vec<(String, String)> {
        let mut out = self.done_reports.clone();
        if !self.exhausted {
            let prefix = format!("step{}_{}_", self.index + 1, self.current.name());
            out.extend(self.current.report().into_iter().map(|(n, t)| (format!("{prefix}{n}"), t)));
        }
        out
    }
}
