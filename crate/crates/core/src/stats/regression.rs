//! Ordinary least squares with per-term significance and backward elimination.

use std::fmt::Write;

use nalgebra::{DMatrix, DVector};

use super::dist::t_two_sided;
use super::StatsError;

/// A model term over factor indexes into `Observations::factors`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Term {
    Intercept,
    Linear(usize),
    Quadratic(usize),
    Interaction(usize, usize),
}

impl Term {
    /// Value of the term at scaled coordinates `x`.
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Term::Intercept => 1.0,
            Term::Linear(i) => x[i],
            Term::Quadratic(i) => x[i] * x[i],
            Term::Interaction(i, j) => x[i] * x[j],
        }
    }

    pub fn is_higher_order(&self) -> bool {
        matches!(self, Term::Quadratic(_) | Term::Interaction(..))
    }

    pub fn factors(&self) -> Vec<usize> {
        match *self {
            Term::Intercept => vec![],
            Term::Linear(i) | Term::Quadratic(i) => vec![i],
            Term::Interaction(i, j) => vec![i, j],
        }
    }

    pub fn label(&self, names: &[String]) -> String {
        match *self {
            Term::Intercept => "(intercept)".to_string(),
            Term::Linear(i) => names[i].clone(),
            Term::Quadratic(i) => format!("{}^2", names[i]),
            Term::Interaction(i, j) => format!("{}*{}", names[i], names[j]),
        }
    }
}

/// Raw factor levels per observation and the response.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub factors: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub response: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    pub factors: Vec<String>,
    /// Divisors applied to raw levels before evaluating terms.
    pub scaling: Vec<f64>,
    pub terms: Vec<Term>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub df_resid: usize,
    pub r_squared: f64,
    pub sigma: f64,
    pub residuals: Vec<f64>,
    /// Terms removed by backward elimination, with their p-value at removal.
    pub removed: Vec<(Term, f64)>,
}

impl RegressionModel {
    fn scaled(&self, levels: &[f64]) -> Vec<f64> {
        levels.iter().zip(&self.scaling).map(|(l, s)| l / s).collect()
    }

    /// Prediction at raw levels given in the order of `factors`.
    pub fn predict(&self, levels: &[f64]) -> f64 {
        let x = self.scaled(levels);
        self.terms
            .iter()
            .zip(&self.coefficients)
            .map(|(t, b)| b * t.value(&x))
            .sum()
    }

    /// Prediction from named levels; every factor used by a term must be present.
    pub fn predict_named(&self, levels: &[(String, f64)]) -> Result<f64, StatsError> {
        let mut v = vec![0.0; self.factors.len()];
        for f in self.used_factors() {
            let name = &self.factors[f];
            v[f] = levels
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, x)| *x)
                .ok_or_else(|| StatsError::MissingFactor(name.clone()))?;
        }
        Ok(self.predict(&v))
    }

    /// Factor indexes referenced by at least one term, ascending.
    pub fn used_factors(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.terms.iter().flat_map(|t| t.factors()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn coefficient(&self, term: Term) -> Option<f64> {
        self.terms.iter().position(|t| *t == term).map(|i| self.coefficients[i])
    }

    pub fn has_term(&self, term: Term) -> bool {
        self.terms.contains(&term)
    }

    /// Tab-separated coefficient table.
    pub fn summary_tsv(&self) -> String {
        let mut out = String::from("term\tcoefficient\tstd_error\tt\tp\n");
        for i in 0..self.terms.len() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                self.terms[i].label(&self.factors),
                self.coefficients[i],
                self.std_errors[i],
                self.t_values[i],
                self.p_values[i]
            );
        }
        let _ = writeln!(out, "# df_resid\t{}", self.df_resid);
        let _ = writeln!(out, "# r_squared\t{}", self.r_squared);
        let _ = writeln!(out, "# sigma\t{}", self.sigma);
        out
    }
}

/// Least squares via QR decomposition; `scaling[f]` divides factor `f`'s levels.
pub fn fit_regression(data: &Observations, terms: &[Term], scaling: &[f64]) -> Result<RegressionModel, StatsError> {
    let n = data.response.len();
    let p = terms.len();
    let k = data.factors.len();
    for t in terms {
        if let Some(&bad) = t.factors().iter().find(|&&f| f >= k) {
            return Err(StatsError::UnknownFactor(bad));
        }
    }
    if n < p + 1 {
        return Err(StatsError::TooFewObservations { observations: n, terms: p });
    }
    if data.rows.len() != n || data.rows.iter().any(|r| r.len() != k) || scaling.len() != k {
        return Err(StatsError::LengthMismatch(data.rows.len(), n));
    }
    if data.response.iter().chain(data.rows.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }

    let xs: Vec<Vec<f64>> = data
        .rows
        .iter()
        .map(|r| r.iter().zip(scaling).map(|(l, s)| l / s).collect())
        .collect();
    let x = DMatrix::from_fn(n, p, |i, j| terms[j].value(&xs[i]));
    let y = DVector::from_column_slice(&data.response);
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..p {
        // Without pivoting |R_jj| is the part of column j not explained by earlier columns.
        if r[(j, j)].abs() <= 1e-10 * x.column(j).norm().max(f64::MIN_POSITIVE) {
            return Err(StatsError::RankDeficient(terms[j].label(&data.factors)));
        }
    }
    let qty = qr.q().transpose() * &y;
    let beta: Vec<f64> = r
        .solve_upper_triangular(&qty)
        .expect("non-singular triangle")
        .iter()
        .copied()
        .collect();
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .expect("non-singular triangle");

    let residuals: Vec<f64> = xs
        .iter()
        .zip(&data.response)
        .map(|(x, y)| y - terms.iter().zip(&beta).map(|(t, b)| b * t.value(x)).sum::<f64>())
        .collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let df_resid = n - p;
    let sigma2 = rss / df_resid as f64;
    let ybar = data.response.iter().sum::<f64>() / n as f64;
    let tss: f64 = data.response.iter().map(|y| (y - ybar).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };

    let mut std_errors = Vec::with_capacity(p);
    let mut t_values = Vec::with_capacity(p);
    let mut p_values = Vec::with_capacity(p);
    for i in 0..p {
        let v: f64 = rinv.row(i).iter().map(|x| x * x).sum();
        let se = (sigma2 * v).sqrt();
        let t = if se > 0.0 {
            beta[i] / se
        } else if beta[i] == 0.0 {
            0.0
        } else {
            beta[i].signum() * f64::INFINITY
        };
        std_errors.push(se);
        t_values.push(t);
        p_values.push(t_two_sided(t, df_resid as f64));
    }

    Ok(RegressionModel {
        factors: data.factors.clone(),
        scaling: scaling.to_vec(),
        terms: terms.to_vec(),
        coefficients: beta,
        std_errors,
        t_values,
        p_values,
        df_resid,
        r_squared,
        sigma: sigma2.sqrt(),
        residuals,
        removed: Vec::new(),
    })
}

/// Repeatedly drops the least significant term above `significance` and refits.
/// Quadratic and interaction terms are considered before linear ones; the
/// intercept is never dropped. Effect heredity is not enforced.
pub fn backward_eliminate(
    data: &Observations,
    full_terms: &[Term],
    significance: f64,
    scaling: &[f64],
) -> Result<RegressionModel, StatsError> {
    let mut terms = full_terms.to_vec();
    let mut removed = Vec::new();
    loop {
        let mut model = fit_regression(data, &terms, scaling)?;
        let pick = |higher: bool| {
            model
                .terms
                .iter()
                .enumerate()
                .filter(|(_, t)| **t != Term::Intercept && t.is_higher_order() == higher)
                .filter(|(i, _)| model.p_values[*i] > significance)
                .max_by(|a, b| model.p_values[a.0].total_cmp(&model.p_values[b.0]))
                .map(|(i, _)| i)
        };
        match pick(true).or_else(|| pick(false)) {
            Some(i) => {
                removed.push((terms[i], model.p_values[i]));
                terms.remove(i);
            }
            None => {
                model.removed = removed;
                return Ok(model);
            }
        }
    }
}

/// Intercept, linear and quadratic terms for `factors`, then the given interactions.
pub fn quadratic_terms(factors: &[usize], quadratic: bool, interactions: &[(usize, usize)]) -> Vec<Term> {
    let mut t = vec![Term::Intercept];
    t.extend(factors.iter().map(|&f| Term::Linear(f)));
    if quadratic {
        t.extend(factors.iter().map(|&f| Term::Quadratic(f)));
    }
    t.extend(interactions.iter().map(|&(a, b)| Term::Interaction(a, b)));
    t
}
