use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{expect_pending, step_level, Best, Strategy, StrategyError};
use crate::model::{enumerate_levels, AnnealSettings, Combination, Factor, Role};

/// Number of points used to estimate the initial temperature, start included.
const PROBES: usize = 5;

/// Metropolis rule for a maximizing search: a drop of `delta` is accepted with
/// probability `exp(-delta / temperature)`.
pub fn acceptance_probability(delta: f64, temperature: f64) -> f64 {
    if delta <= 0.0 {
        1.0
    } else if temperature <= 0.0 {
        0.0
    } else {
        (-delta / temperature).exp()
    }
}

/// Simulated annealing with geometric cooling. Every control factor moves by a
/// uniform 1..=span granules in a random direction per proposal.
pub struct SimulatedAnnealing {
    factors: Vec<Factor>,
    budget: usize,
    cooling: f64,
    span: u32,
    rng: ChaCha8Rng,
    probes: Vec<Combination>,
    probe_ys: Vec<Option<f64>>,
    fixed_t0: Option<f64>,
    temperature: f64,
    current: Combination,
    current_y: Option<f64>,
    issued: usize,
    recorded: usize,
    pending: Option<Combination>,
    best: Best,
    /// (step, temperature, accepted combination, response) for each acceptance.
    pub accepted: Vec<(usize, f64, Combination, Option<f64>)>,
}

impl SimulatedAnnealing {
    pub fn new(
        factors: &[Factor],
        start: Combination,
        settings: &AnnealSettings,
        seed: u64,
    ) -> Result<SimulatedAnnealing, StrategyError> {
        if !(settings.cooling > 0.0 && settings.cooling < 1.0) {
            return Err(StrategyError::Invalid(format!("cooling {} is not in (0, 1)", settings.cooling)));
        }
        if settings.span == 0 {
            return Err(StrategyError::Invalid("span must be at least 1".into()));
        }
        if let Some(t) = settings.initial_temperature {
            if !(t > 0.0 && t.is_finite()) {
                return Err(StrategyError::Invalid(format!("initial temperature {t} must be positive")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut probes = vec![start.clone()];
        if settings.initial_temperature.is_none() {
            let levels: Vec<_> = factors.iter().map(enumerate_levels).collect();
            for _ in 1..PROBES {
                let mut c = start.clone();
                for (f, l) in factors.iter().zip(&levels) {
                    if f.role == Role::Control {
                        c.set(&f.name, l.choose(&mut rng).expect("non-empty levels").clone());
                    }
                }
                probes.push(c);
            }
        }
        probes.truncate(settings.budget);
        // Probes are issued front to back.
        probes.reverse();
        Ok(SimulatedAnnealing {
            factors: factors.to_vec(),
            budget: settings.budget,
            cooling: settings.cooling,
            span: settings.span,
            rng,
            probes,
            probe_ys: Vec::new(),
            fixed_t0: settings.initial_temperature,
            temperature: settings.initial_temperature.unwrap_or(1.0),
            current: start,
            current_y: None,
            issued: 0,
            recorded: 0,
            pending: None,
            best: Best::default(),
            accepted: Vec::new(),
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    fn propose(&mut self) -> Combination {
        let mut c = self.current.clone();
        for f in self.factors.iter().filter(|f| f.role == Role::Control) {
            let k = self.rng.gen_range(1..=self.span) as i64;
            let k = if self.rng.gen_bool(0.5) { k } else { -k };
            let cur = c.get(&f.name).expect("complete combination").clone();
            c.set(&f.name, step_level(f, &cur, k));
        }
        c
    }

    fn finish_probes(&mut self) {
        self.current_y = self.probe_ys[0];
        self.accepted.push((0, self.temperature, self.current.clone(), self.current_y));
        if self.fixed_t0.is_none() {
            let ys: Vec<f64> = self.probe_ys.iter().flatten().copied().collect();
            let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let spread = hi - lo;
            self.temperature = if spread > 0.0 && spread.is_finite() { spread } else { 1.0 };
        }
    }
}

impl Strategy for SimulatedAnnealing {
    fn name(&self) -> &'static str {
        "annealing"
    }

    fn next_combination(&mut self) -> Result<Option<Combination>, StrategyError> {
        if self.pending.is_some() {
            return Err(StrategyError::Contract("previous result not recorded".into()));
        }
        if self.issued >= self.budget {
            return Ok(None);
        }
        let c = match self.probes.pop() {
            Some(p) => p,
            None => self.propose(),
        };
        self.issued += 1;
        self.pending = Some(c.clone());
        Ok(Some(c))
    }

    fn record_result(&mut self, combination: &Combination, response: Option<f64>) -> Result<(), StrategyError> {
        expect_pending(&mut self.pending, combination)?;
        self.recorded += 1;
        self.best.offer(combination, response);
        if self.accepted.is_empty() {
            self.probe_ys.push(response);
            if self.probes.is_empty() {
                self.finish_probes();
            }
            return Ok(());
        }
        let accept = match (response, self.current_y) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(y), Some(c)) => {
                let p = acceptance_probability(c - y, self.temperature);
                p >= 1.0 || self.rng.gen::<f64>() < p
            }
        };
        if accept {
            self.current = combination.clone();
            self.current_y = response;
            self.accepted
                .push((self.recorded, self.temperature, combination.clone(), response));
        }
        self.temperature *= self.cooling;
        Ok(())
    }

    fn is_finished(&self) -> bool {
        self.recorded >= self.budget
    }

    fn best(&self) -> Option<(Combination, f64)> {
        self.best.get()
    }

    fn report(&self) -> Vec<(String, String)> {
        let mut t = String::from("trial\ttemperature\tcombination\tresponse\n");
        for (i, temp, c, y) in &self.accepted {
            let y = y.map_or("ERROR".to_string(), |v| v.to_string());
            t.push_str(&format!("{i}\t{temp}\t{c}\t{y}\n"));
        }
        vec![("annealing_accepted.tsv".into(), t)]
    }
}
