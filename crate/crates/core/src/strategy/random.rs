use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{expect_pending, Best, Strategy, StrategyError};
use crate::model::{enumerate_levels, Combination, Factor, LevelValue};

/// Independent uniform draws over each factor's sampled levels.
pub struct RandomStrategy {
    factors: Vec<Factor>,
    levels: Vec<Vec<LevelValue>>,
    budget: usize,
    issued: usize,
    recorded: usize,
    rng: ChaCha8Rng,
    pending: Option<Combination>,
    best: Best,
}

impl RandomStrategy {
    pub fn new(factors: &[Factor], budget: usize, seed: u64) -> RandomStrategy {
        RandomStrategy {
            factors: factors.to_vec(),
            levels: factors.iter().map(enumerate_levels).collect(),
            budget,
            issued: 0,
            recorded: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: None,
            best: Best::default(),
        }
    }
}

impl Strategy for RandomStrategy {
    fn name(&self) -> &'static str {
        "random"
    }

    fn next_combination(&mut self) -> Result<Option<Combination>, StrategyError> {
        if self.pending.is_some() {
            return Err(StrategyError::Contract("previous result not recorded".into()));
        }
        if self.issued >= self.budget {
            return Ok(None);
        }
        let picks: Vec<LevelValue> = self
            .levels
            .iter()
            .map(|l| l.choose(&mut self.rng).expect("non-empty levels").clone())
            .collect();
        self.issued += 1;
        let c = Combination::from_levels(&self.factors, &picks);
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
        self.recorded >= self.budget
    }

    fn best(&self) -> Option<(Combination, f64)> {
        self.best.get()
    }
}
