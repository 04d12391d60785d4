use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{expect_pending, neighbours, Best, Strategy, StrategyError};
use crate::model::{Combination, Factor};

/// First-improvement hill climbing over one-granule moves of the control factors.
/// Stops when no neighbour is strictly better or the budget is spent.
pub struct HillClimb {
    factors: Vec<Factor>,
    budget: usize,
    rng: ChaCha8Rng,
    current: Combination,
    current_y: Option<f64>,
    started: bool,
    queue: Vec<Combination>,
    issued: usize,
    recorded: usize,
    pending: Option<Combination>,
    stuck: bool,
    best: Best,
    /// Accepted points in order, starting with the start point.
    pub path: Vec<(Combination, Option<f64>)>,
}

impl HillClimb {
    pub fn new(factors: &[Factor], start: Combination, budget: usize, seed: u64) -> HillClimb {
        HillClimb {
            factors: factors.to_vec(),
            budget,
            rng: ChaCha8Rng::seed_from_u64(seed),
            current: start,
            current_y: None,
            started: false,
            queue: Vec::new(),
            issued: 0,
            recorded: 0,
            pending: None,
            stuck: false,
            best: Best::default(),
            path: Vec::new(),
        }
    }

    pub fn current(&self) -> &Combination {
        &self.current
    }

    fn refill(&mut self) {
        let mut n = neighbours(&self.factors, &self.current);
        n.shuffle(&mut self.rng);
        // Popped from the back, so reverse to keep the shuffled order.
        n.reverse();
        self.queue = n;
        self.stuck = self.queue.is_empty();
    }
}

impl Strategy for HillClimb {
    fn name(&self) -> &'static str {
        "hillClimb"
    }

    fn next_combination(&mut self) -> Result<Option<Combination>, StrategyError> {
        if self.pending.is_some() {
            return Err(StrategyError::Contract("previous result not recorded".into()));
        }
        if self.is_finished() {
            return Ok(None);
        }
        let c = if self.started {
            match self.queue.pop() {
                Some(c) => c,
                None => return Ok(None),
            }
        } else {
            self.current.clone()
        };
        self.issued += 1;
        self.pending = Some(c.clone());
        Ok(Some(c))
    }

    fn record_result(&mut self, combination: &Combination, response: Option<f64>) -> Result<(), StrategyError> {
        expect_pending(&mut self.pending, combination)?;
        self.recorded += 1;
        self.best.offer(combination, response);
        if !self.started {
            self.started = true;
            self.current_y = response;
            self.path.push((combination.clone(), response));
            self.refill();
            return Ok(());
        }
        let better = match (response, self.current_y) {
            (Some(y), Some(c)) => y > c,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if better {
            self.current = combination.clone();
            self.current_y = response;
            self.path.push((combination.clone(), response));
            self.refill();
        } else if self.queue.is_empty() {
            self.stuck = true;
        }
        Ok(())
    }

    fn is_finished(&self) -> bool {
        self.stuck || self.recorded >= self.budget
    }

    fn best(&self) -> Option<(Combination, f64)> {
        self.best.get()
    }

    fn recommendation(&self) -> Option<Combination> {
        self.started.then(|| self.current.clone())
    }

    fn report(&self) -> Vec<(String, String)> {
        let mut t = String::from("step\tcombination\tresponse\n");
        for (i, (c, y)) in self.path.iter().enumerate() {
            let y = y.map_or("ERROR".to_string(), |v| v.to_string());
            t.push_str(&format!("{i}\t{c}\t{y}\n"));
        }
        vec![("hill_climb_path.tsv".into(), t)]
    }
}
