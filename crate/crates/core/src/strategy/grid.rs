use super::{expect_pending, Best, Strategy, StrategyError};
use crate::doe::{full_factorial, randomized_run_order, DesignMatrix, DEFAULT_FACTORIAL_CAP};
use crate::model::{Combination, Factor};

/// Full factorial over every factor's sampled levels, `r` randomized blocks.
pub struct GridStrategy {
    factors: Vec<Factor>,
    design: DesignMatrix,
    order: Vec<usize>,
    next: usize,
    pending: Option<Combination>,
    recorded: usize,
    best: Best,
}

impl GridStrategy {
    pub fn new(factors: &[Factor], replications: usize, seed: u64) -> Result<GridStrategy, StrategyError> {
        let design = full_factorial(factors, DEFAULT_FACTORIAL_CAP)?;
        let order = randomized_run_order(&design, replications, seed);
        Ok(GridStrategy {
            factors: factors.to_vec(),
            design,
            order,
            next: 0,
            pending: None,
            recorded: 0,
            best: Best::default(),
        })
    }
}

impl Strategy for GridStrategy {
    fn name(&self) -> &'static str {
        "grid"
    }

    fn next_combination(&mut self) -> Result<Option<Combination>, StrategyError> {
        if self.pending.is_some() {
            return Err(StrategyError::Contract("previous result not recorded".into()));
        }
        let Some(&row) = self.order.get(self.next) else { return Ok(None) };
        self.next += 1;
        let c = self
            .design
            .combination(row, &self.factors, &Combination::default())
            .expect("factorial covers every factor");
        self.pending = Some(c.clone());
        Ok(Some(c))
    }

    fn record_result(&mut self, combination: &Combination, response: Option<f64>) -> Result<(), StrategyError> {
        expect_pending(&mut self.pending, combination)?;
        self.recorded += 1;
        self.best.offer(combination, response);
        Ok(())
    }

    fn is_finished(&self) -> bool {
        self.recorded >= self.order.len()
    }

    fn best(&self) -> Option<(Combination, f64)> {
        self.best.get()
    }
}
