use super::{cmp_f64, expect_pending, Best, Strategy, StrategyError};
use crate::doe::catalog::{by_name, candidates};
use crate::doe::{
    allocate_factors, build_design_matrix, central_composite, check_allocation, default_alpha, full_factorial,
    randomized_run_order, Allocation, CcdAxis, CentralCompositeSpec, CornerKind, DesignError, DesignMatrix, DesignRow,
    OrthogonalArray, DEFAULT_FACTORIAL_CAP,
};
use crate::model::{
    enumerate_levels, Combination, Factor, LevelDomain, LevelValue, Role, TaguchiSettings,
};
use crate::stats::regression::quadratic_terms;
use crate::stats::{
    backward_eliminate, fit_regression, main_effects, predict_optimum, snr_larger_better, Observations,
    RegressionModel, Region, Term,
};

/// Default coded-to-uncoded map: first, middle and last sampled level (or first
/// and last for two levels).
pub fn default_level_map(factor: &Factor, levels: u8) -> Result<Vec<LevelValue>, StrategyError> {
    let all = enumerate_levels(factor);
    if all.len() < levels as usize {
        return Err(StrategyError::Invalid(format!(
            "{} has {} sampled levels, {levels} needed",
            factor.name,
            all.len()
        )));
    }
    let n = all.len();
    Ok(match levels {
        2 => vec![all[0].clone(), all[n - 1].clone()],
        _ => vec![all[0].clone(), all[(n - 1) / 2].clone(), all[n - 1].clone()],
    })
}

/// Outcome of analysing one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAnalysis {
    /// Inner design, control factors only.
    pub design: DesignMatrix,
    /// Successful responses per design row.
    pub responses: Vec<Vec<f64>>,
    /// Signal-to-noise ratio per design row; `None` when every trial failed.
    pub snr: Vec<Option<f64>>,
    /// Model before and after elimination; absent when the design is saturated.
    pub full: Option<RegressionModel>,
    pub reduced: Option<RegressionModel>,
    /// Chosen level for every control factor in the design.
    pub optimum: Vec<(String, LevelValue)>,
    pub predicted: Option<f64>,
    /// Unsnapped model maximizer for the factors the reduced model uses.
    pub continuous: Vec<(String, f64)>,
}

impl PhaseAnalysis {
    pub fn optimum_level(&self, name: &str) -> Option<&LevelValue> {
        self.optimum.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn snr_tsv(&self) -> String {
        let mut out: Vec<String> = self.design.factors.iter().map(|f| f.name.clone()).collect();
        out.extend(["n".into(), "mean".into(), "snr".into()]);
        let mut t = out.join("\t");
        t.push('\n');
        for (i, row) in self.design.rows.iter().enumerate() {
            let mut cells: Vec<String> = row.levels.iter().map(|l| l.to_string()).collect();
            let ys = &self.responses[i];
            cells.push(ys.len().to_string());
            cells.push(if ys.is_empty() {
                "NA".into()
            } else {
                (ys.iter().sum::<f64>() / ys.len() as f64).to_string()
            });
            cells.push(self.snr[i].map_or("NA".into(), |s| s.to_string()));
            t.push_str(&cells.join("\t"));
            t.push('\n');
        }
        t
    }

    pub fn optimum_tsv(&self) -> String {
        let mut t = String::from("factor\tlevel\tcontinuous\n");
        for (n, l) in &self.optimum {
            let c = self
                .continuous
                .iter()
                .find(|(m, _)| m == n)
                .map_or("NA".into(), |(_, v)| v.to_string());
            t.push_str(&format!("{n}\t{l}\t{c}\n"));
        }
        if let Some(p) = self.predicted {
            t.push_str(&format!("# predicted_snr\t{p}\n"));
        }
        t
    }
}

/// What to fit for one phase.
#[derive(Debug, Clone)]
pub struct AnalysisSpec {
    /// Factors entering the regression (columns of the design).
    pub model_factors: Vec<Factor>,
    pub quadratic: bool,
    pub interactions: Vec<(String, String)>,
    pub scaling: Vec<(String, f64)>,
    pub significance: f64,
}

/// Computes SNR per design row, fits and reduces the model, and predicts the
/// optimum over the tested region. Design factors the reduced model does not
/// use take the level with the best mean SNR.
pub fn analyze_phase(
    design: &DesignMatrix,
    responses: &[Vec<f64>],
    spec: &AnalysisSpec,
) -> Result<PhaseAnalysis, StrategyError> {
    let snr: Vec<Option<f64>> = responses
        .iter()
        .map(|ys| if ys.is_empty() { Ok(None) } else { snr_larger_better(ys).map(Some) })
        .collect::<Result<_, _>>()?;
    let kept: Vec<usize> = (0..design.len()).filter(|&i| snr[i].is_some()).collect();

    let cols: Vec<usize> = spec
        .model_factors
        .iter()
        .map(|f| {
            design
                .factor_index(&f.name)
                .ok_or_else(|| StrategyError::Invalid(format!("{} is not in the design", f.name)))
        })
        .collect::<Result<_, _>>()?;
    let names: Vec<String> = spec.model_factors.iter().map(|f| f.name.clone()).collect();
    let idx = |n: &str| {
        names
            .iter()
            .position(|x| x == n)
            .ok_or_else(|| StrategyError::Invalid(format!("interaction names unknown factor {n}")))
    };
    let pairs: Vec<(usize, usize)> = spec
        .interactions
        .iter()
        .map(|(a, b)| Ok((idx(a)?, idx(b)?)))
        .collect::<Result<_, StrategyError>>()?;
    let scaling: Vec<f64> = names
        .iter()
        .map(|n| spec.scaling.iter().find(|(m, _)| m == n).map_or(1.0, |(_, s)| *s))
        .collect();
    let raw = |i: usize, c: usize| -> Result<f64, StrategyError> {
        design.rows[i].levels[c]
            .as_f64()
            .ok_or_else(|| StrategyError::Invalid(format!("{} is not numeric", design.factors[c].name)))
    };
    let mut rows = Vec::with_capacity(kept.len());
    for &i in &kept {
        rows.push(cols.iter().map(|&c| raw(i, c)).collect::<Result<Vec<f64>, _>>()?);
    }
    let data = Observations {
        factors: names.clone(),
        rows,
        response: kept.iter().map(|&i| snr[i].expect("kept rows have a ratio")).collect(),
    };
    let all: Vec<usize> = (0..names.len()).collect();
    let terms = quadratic_terms(&all, spec.quadratic, &pairs);

    let mut full = None;
    let mut reduced = None;
    let mut predicted = None;
    let mut continuous = Vec::new();
    let mut modelled: Vec<(String, LevelValue)> = Vec::new();
    if data.response.len() > terms.len() {
        let f = fit_regression(&data, &terms, &scaling)?;
        let r = backward_eliminate(&data, &terms, spec.significance, &scaling)?;
        if !r.used_factors().is_empty() {
            let mut region = Region {
                lower: vec![f64::INFINITY; names.len()],
                upper: vec![f64::NEG_INFINITY; names.len()],
            };
            for row in &data.rows {
                for (k, v) in row.iter().enumerate() {
                    region.lower[k] = region.lower[k].min(*v);
                    region.upper[k] = region.upper[k].max(*v);
                }
            }
            let opt = predict_optimum(&r, &spec.model_factors, &region)?;
            predicted = Some(opt.predicted);
            continuous = opt
                .levels
                .iter()
                .map(|(n, _)| n.clone())
                .zip(opt.continuous.iter().copied())
                .collect();
            modelled = opt.levels;
        }
        full = Some(f);
        reduced = Some(r);
    }

    let kept_levels = |c: usize| -> Vec<LevelValue> { kept.iter().map(|&i| design.rows[i].levels[c].clone()).collect() };
    let mut optimum = Vec::with_capacity(design.factors.len());
    for (c, f) in design.factors.iter().enumerate() {
        if f.role != Role::Control {
            continue;
        }
        if let Some((_, l)) = modelled.iter().find(|(n, _)| *n == f.name) {
            optimum.push((f.name.clone(), l.clone()));
            continue;
        }
        let effects = main_effects(&kept_levels(c), &data.response);
        // Ties keep the smaller level.
        let best = effects
            .into_iter()
            .reduce(|a, b| if cmp_f64(b.1, a.1).is_gt() { b } else { a })
            .map(|(l, _)| l)
            .or_else(|| design.rows.first().map(|r| r.levels[c].clone()))
            .ok_or_else(|| StrategyError::Invalid("empty design".into()))?;
        optimum.push((f.name.clone(), best));
    }
    Ok(PhaseAnalysis {
        design: design.clone(),
        responses: responses.to_vec(),
        snr,
        full,
        reduced,
        optimum,
        predicted,
        continuous,
    })
}

/// One phase's run plan: an inner design crossed with the noise factorial, in
/// `r` randomized blocks.
struct Plan {
    inner: DesignMatrix,
    crossed: DesignMatrix,
    n_noise: usize,
    order: Vec<usize>,
    next: usize,
    pending: Option<(usize, Combination)>,
    responses: Vec<Vec<f64>>,
    recorded: usize,
}

impl Plan {
    fn new(inner: DesignMatrix, noise: &Option<DesignMatrix>, all: &[Factor], r: usize, seed: u64) -> Plan {
        let noise_rows: Vec<DesignRow> = match noise {
            Some(n) => n.rows.clone(),
            None => vec![DesignRow {
                levels: Vec::new(),
                coded: Vec::new(),
                kind: crate::doe::RowKind::Row(0),
            }],
        };
        let mut factors = inner.factors.clone();
        if let Some(n) = noise {
            factors.extend(n.factors.iter().cloned());
        }
        let mut rows = Vec::with_capacity(inner.len() * noise_rows.len());
        for row in &inner.rows {
            for n in &noise_rows {
                let mut levels = row.levels.clone();
                levels.extend(n.levels.iter().cloned());
                rows.push(DesignRow {
                    levels,
                    coded: row.coded.clone(),
                    kind: row.kind.clone(),
                });
            }
        }
        let crossed = DesignMatrix {
            factors,
            rows,
            kind: inner.kind.clone(),
            replications: r,
        };
        let order = randomized_run_order(&crossed, r, seed);
        debug_assert!(crossed.combination(0, all, &Combination::default()).is_some());
        Plan {
            responses: vec![Vec::new(); inner.len()],
            n_noise: noise_rows.len(),
            inner,
            crossed,
            order,
            next: 0,
            pending: None,
            recorded: 0,
        }
    }

    fn complete(&self) -> bool {
        self.recorded == self.order.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
    Done,
}

/// Two-phase robust design: an orthogonal-array screen analysed on SNR, then a
/// central composite design around the predicted optimum.
pub struct TaguchiStrategy {
    settings: TaguchiSettings,
    all: Vec<Factor>,
    controls: Vec<Factor>,
    noise: Option<DesignMatrix>,
    seed: u64,
    phase: Phase,
    plan: Plan,
    array: &'static OrthogonalArray,
    allocation: Allocation,
    level_maps: Vec<(String, Vec<LevelValue>)>,
    best: Best,
    pub phase1: Option<PhaseAnalysis>,
    pub phase2: Option<PhaseAnalysis>,
    /// Centre, steps and α of the second-phase design.
    pub ccd: Option<CentralCompositeSpec>,
    final_optimum: Option<Vec<(String, LevelValue)>>,
}

fn choose_array(
    s: &TaguchiSettings,
    names: &[String],
) -> Result<(&'static OrthogonalArray, Allocation), StrategyError> {
    let alloc = |oa: &OrthogonalArray| -> Result<Allocation, DesignError> {
        if s.allocation.is_empty() {
            allocate_factors(oa, names, &s.interactions)
        } else {
            for n in names {
                if !s.allocation.iter().any(|(f, _)| f == n) {
                    return Err(DesignError::InvalidAllocation(format!("{n} has no column")));
                }
            }
            check_allocation(oa, &s.allocation, &s.interactions)
        }
    };
    if let Some(name) = &s.array {
        let oa = by_name(name).ok_or_else(|| StrategyError::Invalid(format!("unknown array {name}")))?;
        if oa.levels != s.levels {
            return Err(StrategyError::Invalid(format!("{name} has {} levels, not {}", oa.levels, s.levels)));
        }
        return Ok((oa, alloc(oa)?));
    }
    let needed = names.len() + s.interactions.len() * (s.levels as usize - 1);
    let mut last = DesignError::NoArray {
        levels: s.levels,
        needed_columns: needed,
    };
    for oa in candidates(s.levels, needed) {
        match alloc(oa) {
            Ok(a) => return Ok((oa, a)),
            Err(e) => last = e,
        }
    }
    Err(last.into())
}

impl TaguchiStrategy {
    pub fn new(factors: &[Factor], settings: TaguchiSettings, seed: u64) -> Result<TaguchiStrategy, StrategyError> {
        if !(settings.levels == 2 || settings.levels == 3) {
            return Err(StrategyError::Invalid(format!("levels must be 2 or 3, not {}", settings.levels)));
        }
        if settings.replications < 2 {
            return Err(StrategyError::Invalid("signal-to-noise analysis needs at least two replications".into()));
        }
        let controls: Vec<Factor> = factors.iter().filter(|f| f.role == Role::Control).cloned().collect();
        let noise_factors: Vec<Factor> = factors.iter().filter(|f| f.role == Role::Noise).cloned().collect();
        for f in &controls {
            if !f.tag().is_numeric() {
                return Err(StrategyError::Invalid(format!("{} is not numeric", f.name)));
            }
        }
        let mut level_maps = Vec::with_capacity(controls.len());
        for f in &controls {
            let map = match settings.level_maps.iter().find(|(n, _)| *n == f.name) {
                Some((_, m)) => m.clone(),
                None => default_level_map(f, settings.levels)?,
            };
            level_maps.push((f.name.clone(), map));
        }
        let names: Vec<String> = controls.iter().map(|f| f.name.clone()).collect();
        let (array, allocation) = choose_array(&settings, &names)?;
        let inner = build_design_matrix(array, &allocation, &controls, &level_maps)?;
        let noise = if noise_factors.is_empty() {
            None
        } else {
            Some(full_factorial(&noise_factors, DEFAULT_FACTORIAL_CAP)?)
        };
        let plan = Plan::new(inner, &noise, factors, settings.replications, seed);
        Ok(TaguchiStrategy {
            settings,
            all: factors.to_vec(),
            controls,
            noise,
            seed,
            phase: Phase::One,
            plan,
            array,
            allocation,
            level_maps,
            best: Best::default(),
            phase1: None,
            phase2: None,
            ccd: None,
            final_optimum: None,
        })
    }

    pub fn array(&self) -> &'static OrthogonalArray {
        self.array
    }

    pub fn allocation(&self) -> &Allocation {
        &self.allocation
    }

    pub fn level_maps(&self) -> &[(String, Vec<LevelValue>)] {
        &self.level_maps
    }

    /// Runs of the current phase: inner design crossed with the noise factorial.
    pub fn current_design(&self) -> &DesignMatrix {
        &self.plan.crossed
    }

    pub fn final_optimum(&self) -> Option<&[(String, LevelValue)]> {
        self.final_optimum.as_deref()
    }

    fn scaling(&self) -> Vec<(String, f64)> {
        self.settings.scaling.clone()
    }

    fn finish_phase1(&mut self) -> Result<(), StrategyError> {
        let spec = AnalysisSpec {
            model_factors: self.controls.clone(),
            quadratic: self.settings.levels == 3,
            interactions: self.settings.interactions.clone(),
            scaling: self.scaling(),
            significance: self.settings.significance,
        };
        let a = analyze_phase(&self.plan.inner, &self.plan.responses, &spec)?;
        let optimum = a.optimum.clone();
        let reduced = a.reduced.clone();
        self.phase1 = Some(a);
        self.final_optimum = Some(optimum.clone());
        if self.settings.stop_after_phase1 {
            self.phase = Phase::Done;
            return Ok(());
        }
        match self.phase2_spec(&optimum, reduced.as_ref())? {
            Some(spec) => {
                let inner = central_composite(&spec)?;
                self.plan = Plan::new(
                    inner,
                    &self.noise,
                    &self.all,
                    self.settings.replications,
                    self.seed.wrapping_add(1),
                );
                self.ccd = Some(spec);
                self.phase = Phase::Two;
            }
            None => self.phase = Phase::Done,
        }
        Ok(())
    }

    /// Second-phase design around the phase-1 optimum. Range factors with a
    /// retained main-effect term are varied; everything else is pinned.
    fn phase2_spec(
        &self,
        optimum: &[(String, LevelValue)],
        reduced: Option<&RegressionModel>,
    ) -> Result<Option<CentralCompositeSpec>, StrategyError> {
        let Some(model) = reduced else { return Ok(None) };
        let level = |n: &str| optimum.iter().find(|(m, _)| m == n).map(|(_, l)| l.clone());
        let mut candidates = Vec::new();
        for (i, name) in model.factors.iter().enumerate() {
            let main = model.has_term(Term::Linear(i)) || model.has_term(Term::Quadratic(i));
            let f = self.controls.iter().find(|f| f.name == *name).expect("model factor is a control");
            if main && matches!(f.domain, LevelDomain::Range { .. }) {
                candidates.push(f.clone());
            }
        }
        let alpha_for = |k: usize| self.settings.alpha_star.unwrap_or_else(|| default_alpha(k));
        let alpha = alpha_for(candidates.len().max(1));
        let mut axes = Vec::new();
        for f in candidates {
            let LevelDomain::Range {
                lower,
                upper,
                legal_granularity: g,
                ..
            } = f.domain
            else {
                unreachable!()
            };
            let centre = level(&f.name).and_then(|l| l.as_f64()).expect("optimum covers every control");
            let step = match self.settings.steps.iter().find(|(n, _)| *n == f.name) {
                Some((_, s)) => *s,
                None => {
                    let map = &self.level_maps.iter().find(|(n, _)| *n == f.name).expect("mapped").1;
                    let vals: Vec<f64> = map.iter().filter_map(LevelValue::as_f64).collect();
                    let width = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                        - vals.iter().copied().fold(f64::INFINITY, f64::min);
                    let room = (centre - lower).min(upper - centre) / alpha;
                    let s = (width / 8.0).min(room);
                    (s / g).floor() * g
                }
            };
            if step >= g {
                axes.push(CcdAxis {
                    factor: f.clone(),
                    centre,
                    step,
                });
            }
        }
        if axes.is_empty() {
            return Ok(None);
        }
        let alpha = alpha_for(axes.len());
        let fixed = self
            .controls
            .iter()
            .filter(|f| !axes.iter().any(|a| a.factor.name == f.name))
            .map(|f| (f.clone(), level(&f.name).expect("optimum covers every control")))
            .collect();
        Ok(Some(CentralCompositeSpec {
            axes,
            alpha,
            fixed,
            n_center: self.settings.centre_points,
            corners: CornerKind::Full,
        }))
    }

    fn finish_phase2(&mut self) -> Result<(), StrategyError> {
        let spec = self.ccd.as_ref().expect("phase two has a design");
        let varied: Vec<Factor> = spec.axes.iter().map(|a| a.factor.clone()).collect();
        let mut interactions = Vec::new();
        for i in 0..varied.len() {
            for j in (i + 1)..varied.len() {
                interactions.push((varied[i].name.clone(), varied[j].name.clone()));
            }
        }
        let a = analyze_phase(
            &self.plan.inner,
            &self.plan.responses,
            &AnalysisSpec {
                model_factors: varied.clone(),
                quadratic: true,
                interactions,
                scaling: self.scaling(),
                significance: self.settings.significance,
            },
        )?;
        let mut fin = self.final_optimum.clone().unwrap_or_default();
        for (n, l) in &mut fin {
            let modelled = a
                .reduced
                .as_ref()
                .is_some_and(|m| m.factors.iter().position(|f| f == n).is_some_and(|i| m.used_factors().contains(&i)));
            if modelled {
                if let Some(v) = a.optimum_level(n) {
                    *l = v.clone();
                }
            }
        }
        self.final_optimum = Some(fin);
        self.phase2 = Some(a);
        self.phase = Phase::Done;
        Ok(())
    }
}

impl Strategy for TaguchiStrategy {
    fn name(&self) -> &'static str {
        "taguchi"
    }

    fn next_combination(&mut self) -> Result<Option<Combination>, StrategyError> {
        if self.plan.pending.is_some() {
            return Err(StrategyError::Contract("previous result not recorded".into()));
        }
        if self.phase == Phase::Done {
            return Ok(None);
        }
        let Some(&k) = self.plan.order.get(self.plan.next) else { return Ok(None) };
        self.plan.next += 1;
        let c = self
            .plan
            .crossed
            .combination(k, &self.all, &Combination::default())
            .expect("crossed design covers every factor");
        self.plan.pending = Some((k, c.clone()));
        Ok(Some(c))
    }

    fn record_result(&mut self, combination: &Combination, response: Option<f64>) -> Result<(), StrategyError> {
        let (k, c) = self
            .plan
            .pending
            .take()
            .ok_or_else(|| StrategyError::Contract(format!("result for {combination} with nothing pending")))?;
        expect_pending(&mut Some(c), combination)?;
        self.plan.recorded += 1;
        self.best.offer(combination, response);
        if let Some(y) = response {
            self.plan.responses[k / self.plan.n_noise].push(y);
        }
        if self.plan.complete() {
            match self.phase {
                Phase::One => self.finish_phase1()?,
                Phase::Two => self.finish_phase2()?,
                Phase::Done => {}
            }
        }
        Ok(())
    }

    fn is_finished(&self) -> bool {
        self.phase == Phase::Done
    }

    fn best(&self) -> Option<(Combination, f64)> {
        self.best.get()
    }

    fn recommendation(&self) -> Option<Combination> {
        let Some(opt) = &self.final_optimum else { return self.best().map(|(c, _)| c) };
        let levels: Vec<LevelValue> = self
            .all
            .iter()
            .map(|f| match opt.iter().find(|(n, _)| *n == f.name) {
                Some((_, l)) => l.clone(),
                None => enumerate_levels(f).into_iter().next().expect("non-empty levels"),
            })
            .collect();
        Some(Combination::from_levels(&self.all, &levels))
    }

    fn report(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (tag, a) in [("phase1", &self.phase1), ("phase2", &self.phase2)] {
            let Some(a) = a else { continue };
            out.push((format!("{tag}_design.tsv"), a.design.to_tsv()));
            out.push((format!("{tag}_snr.tsv"), a.snr_tsv()));
            if let Some(m) = &a.full {
                out.push((format!("{tag}_model_full.tsv"), m.summary_tsv()));
            }
            if let Some(m) = &a.reduced {
                out.push((format!("{tag}_model_reduced.tsv"), m.summary_tsv()));
            }
            out.push((format!("{tag}_optimum.tsv"), a.optimum_tsv()));
        }
        if let Some(f) = &self.final_optimum {
            let mut t = String::from("factor\tlevel\n");
            for (n, l) in f {
                t.push_str(&format!("{n}\t{l}\n"));
            }
            out.push(("final_optimum.tsv".into(), t));
        }
        out
    }
}
