//! Maximizing a fitted quadratic model over a box of tested levels.

use nalgebra::{DMatrix, DVector};

use super::regression::{RegressionModel, Term};
use super::StatsError;
use crate::model::{level_in_domain, Factor, LevelDomain, LevelValue, GRANULE_TOLERANCE};

/// Exhaustive face enumeration visits 3^k faces; beyond this it is refused.
pub const MAX_OPTIMUM_FACTORS: usize = 12;

/// Tested level bounds for every model factor, in raw units.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimumResult {
    /// Snapped levels for the factors the model uses.
    pub levels: Vec<(String, LevelValue)>,
    pub predicted: f64,
    /// Unsnapped maximizer in raw units, same order as `levels`.
    pub continuous: Vec<f64>,
}

impl OptimumResult {
    pub fn level(&self, name: &str) -> Option<&LevelValue> {
        self.levels.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

/// `f(x) = c + g.x + x'Qx` restricted to the used factors, in scaled units.
struct Quadratic {
    c: f64,
    g: Vec<f64>,
    /// Hessian (symmetric), so the quadratic part is x'Hx / 2.
    h: Vec<Vec<f64>>,
}

impl Quadratic {
    fn from_model(m: &RegressionModel, used: &[usize]) -> Quadratic {
        let k = used.len();
        let pos = |f: usize| used.iter().position(|&u| u == f).expect("used factor");
        let mut q = Quadratic {
            c: 0.0,
            g: vec![0.0; k],
            h: vec![vec![0.0; k]; k],
        };
        for (t, &b) in m.terms.iter().zip(&m.coefficients) {
            match *t {
                Term::Intercept => q.c += b,
                Term::Linear(i) => q.g[pos(i)] += b,
                Term::Quadratic(i) => q.h[pos(i)][pos(i)] += 2.0 * b,
                Term::Interaction(i, j) if i == j => q.h[pos(i)][pos(i)] += 2.0 * b,
                Term::Interaction(i, j) => {
                    let (a, c) = (pos(i), pos(j));
                    q.h[a][c] += b;
                    q.h[c][a] += b;
                }
            }
        }
        q
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.c;
        for i in 0..x.len() {
            v += self.g[i] * x[i];
            for j in 0..x.len() {
                v += 0.5 * self.h[i][j] * x[i] * x[j];
            }
        }
        v
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve(a: Vec<Vec<f64>>, b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let lu = m.full_piv_lu();
    let u = lu.u();
    if (0..n).any(|i| u[(i, i)].abs() <= 1e-12 * scale) {
        return None;
    }
    lu.solve(&DVector::from_vec(b)).map(|x| x.iter().copied().collect())
}

/// Legal levels bracketing `v` within `[lo, hi]` (at most two, ascending).
fn bracket(factor: &Factor, v: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut c = match &factor.domain {
        LevelDomain::Range {
            lower,
            legal_granularity: g,
            ..
        } => {
            let k = (v - lower) / g;
            let near = k.round();
            if (k - near).abs() <= GRANULE_TOLERANCE {
                vec![lower + near * g]
            } else {
                vec![lower + k.floor() * g, lower + k.ceil() * g]
            }
        }
        LevelDomain::Enumeration { levels, .. } => {
            let mut vals: Vec<f64> = levels.iter().filter_map(LevelValue::as_f64).collect();
            vals.sort_by(f64::total_cmp);
            let below = vals.iter().copied().filter(|x| *x <= v).last();
            let above = vals.iter().copied().find(|x| *x >= v);
            below.into_iter().chain(above).collect()
        }
    };
    let tol = GRANULE_TOLERANCE * (hi - lo).abs().max(1.0);
    c.retain(|x| *x >= lo - tol && *x <= hi + tol);
    c.dedup();
    if c.is_empty() {
        // Region narrower than a granule: fall back to the nearest region bound.
        c.push(if (v - lo).abs() <= (hi - v).abs() { lo } else { hi });
    }
    c
}

/// Maximizes `model` over `region` (raw units, one bound per model factor).
///
/// Every face of the box is tried: each used factor is free, at its lower bound,
/// or at its upper bound, and the stationary point of the restricted quadratic is
/// solved. The best interior-feasible candidate is then snapped to the legal
/// levels on either side in each coordinate; all snap neighbours are evaluated
/// and ties go to the smaller levels.
pub fn predict_optimum(model: &RegressionModel, factors: &[Factor], region: &Region) -> Result<OptimumResult, StatsError> {
    let used = model.used_factors();
    let k = used.len();
    if k > MAX_OPTIMUM_FACTORS {
        return Err(StatsError::TooManyFactors(k));
    }
    let mut doms = Vec::with_capacity(k);
    for &f in &used {
        let name = &model.factors[f];
        let fac = factors
            .iter()
            .find(|x| &x.name == name)
            .ok_or_else(|| StatsError::MissingFactor(name.clone()))?;
        let (lo, hi) = match (region.lower.get(f), region.upper.get(f)) {
            (Some(l), Some(h)) if l.is_finite() && h.is_finite() && l <= h => (*l, *h),
            _ => return Err(StatsError::NoRegion(name.clone())),
        };
        doms.push((fac, lo, hi, model.scaling[f]));
    }
    let q = Quadratic::from_model(model, &used);
    let lo_s: Vec<f64> = doms.iter().map(|d| d.1 / d.3).collect();
    let hi_s: Vec<f64> = doms.iter().map(|d| d.2 / d.3).collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let faces = 3usize.pow(k as u32);
    for face in 0..faces {
        let mut state = vec![0u8; k];
        let mut n = face;
        for s in state.iter_mut() {
            *s = (n % 3) as u8;
            n /= 3;
        }
        let mut x = vec![0.0; k];
        let free: Vec<usize> = (0..k).filter(|&i| state[i] == 0).collect();
        for i in 0..k {
            match state[i] {
                1 => x[i] = lo_s[i],
                2 => x[i] = hi_s[i],
                _ => {}
            }
        }
        if !free.is_empty() {
            let a: Vec<Vec<f64>> = free.iter().map(|&i| free.iter().map(|&j| q.h[i][j]).collect()).collect();
            let b: Vec<f64> = free
                .iter()
                .map(|&i| {
                    -(q.g[i]
                        + (0..k)
                            .filter(|j| state[*j] != 0)
                            .map(|j| q.h[i][j] * x[j])
                            .sum::<f64>())
                })
                .collect();
            let Some(sol) = solve(a, b) else { continue };
            let mut inside = true;
            for (&i, v) in free.iter().zip(sol) {
                let tol = 1e-9 * (hi_s[i] - lo_s[i]).abs().max(1e-12);
                if v < lo_s[i] - tol || v > hi_s[i] + tol {
                    inside = false;
                    break;
                }
                x[i] = v.clamp(lo_s[i], hi_s[i]);
            }
            if !inside {
                continue;
            }
        }
        let val = q.eval(&x);
        if best.as_ref().map_or(true, |(b, _)| val > *b) {
            best = Some((val, x));
        }
    }
    let (_, xs) = best.unwrap_or_else(|| (q.eval(&lo_s), lo_s.clone()));
    let continuous: Vec<f64> = xs.iter().zip(&doms).map(|(x, d)| x * d.3).collect();

    let brackets: Vec<Vec<f64>> = continuous
        .iter()
        .zip(&doms)
        .map(|(v, d)| bracket(d.0, *v, d.1, d.2))
        .collect();
    let total: usize = brackets.iter().map(Vec::len).product();
    let mut chosen: Option<(f64, Vec<f64>)> = None;
    for n in 0..total {
        // First factor most significant, so candidates come in ascending order.
        let mut idx = vec![0usize; k];
        let mut m = n;
        for i in (0..k).rev() {
            idx[i] = m % brackets[i].len();
            m /= brackets[i].len();
        }
        let lv: Vec<f64> = idx.iter().zip(&brackets).map(|(&i, b)| b[i]).collect();
        let xs: Vec<f64> = lv.iter().zip(&doms).map(|(v, d)| v / d.3).collect();
        let val = q.eval(&xs);
        let better = match &chosen {
            None => true,
            Some((b, _)) => val > b + 1e-12 * b.abs().max(1.0),
        };
        if better {
            chosen = Some((val, lv));
        }
    }
    let (predicted, lv) = chosen.expect("at least one snap candidate");
    let mut levels = Vec::with_capacity(k);
    for (v, d) in lv.iter().zip(&doms) {
        let level = LevelValue::from_f64(d.0.tag(), *v).ok_or(StatsError::NonFinite)?;
        if !level_in_domain(d.0, &level).unwrap_or(false) {
            return Err(StatsError::NoRegion(d.0.name.clone()));
        }
        levels.push((d.0.name.clone(), level));
    }
    Ok(OptimumResult {
        levels,
        predicted,
        continuous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LevelTag;
    use crate::stats::regression::{fit_regression, Observations};

    #[test]
    fn vertex_of_parabola() {
        let data = Observations {
            factors: vec!["x".into()],
            rows: (0..=10).map(|i| vec![i as f64]).collect(),
            response: (0..=10).map(|i| -((i as f64 - 3.0).powi(2))).collect(),
        };
        let m = fit_regression(&data, &[Term::Intercept, Term::Linear(0), Term::Quadratic(0)], &[1.0]).unwrap();
        let f = Factor::range("x", LevelTag::Int, 0.0, 10.0, 1.0, 1.0);
        let r = predict_optimum(&m, &[f], &Region { lower: vec![0.0], upper: vec![10.0] }).unwrap();
        assert_eq!(r.level("x"), Some(&LevelValue::Int(3)));
    }

    #[test]
    fn flat_model_prefers_smaller_level() {
        let data = Observations {
            factors: vec!["x".into()],
            rows: (0..5).map(|i| vec![i as f64]).collect(),
            response: vec![1.0, 1.0, 1.0, 1.0, 1.0001],
        };
        let mut m = fit_regression(&data, &[Term::Intercept, Term::Linear(0)], &[1.0]).unwrap();
        m.coefficients[1] = 0.0;
        let f = Factor::range("x", LevelTag::Int, 0.0, 4.0, 1.0, 1.0);
        let r = predict_optimum(&m, &[f], &Region { lower: vec![0.0], upper: vec![4.0] }).unwrap();
        assert_eq!(r.level("x"), Some(&LevelValue::Int(0)));
    }
}
