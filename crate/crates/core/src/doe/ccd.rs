//! Central composite designs around a centre point.

use super::design::{DesignKind, DesignMatrix, DesignRow, RowKind};
use super::DesignError;
use crate::model::{level_in_domain, Factor, LevelDomain, LevelValue};

#[derive(Debug, Clone, PartialEq)]
pub struct CcdAxis {
    pub factor: Factor,
    pub centre: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerKind {
    Full,
    /// Half fraction; the last factor's sign is the product of the others.
    Fractional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralCompositeSpec {
    pub axes: Vec<CcdAxis>,
    pub alpha: f64,
    pub fixed: Vec<(Factor, LevelValue)>,
    pub n_center: usize,
    pub corners: CornerKind,
}

/// Rotatable axial distance for `k` varied factors with full corners.
pub fn default_alpha(k: usize) -> f64 {
    2f64.powf(k as f64 / 4.0)
}

/// Rounds `v` to the nearest legal level (halves away from zero) and checks it
/// lies in the domain.
pub fn snap_to_legal(factor: &Factor, v: f64) -> Result<LevelValue, DesignError> {
    let out = || DesignError::OutOfRange {
        factor: factor.name.clone(),
        value: v,
    };
    let snapped = match &factor.domain {
        LevelDomain::Range {
            lower,
            legal_granularity: g,
            ..
        } => lower + ((v - lower) / g).round() * g,
        LevelDomain::Enumeration { .. } => v,
    };
    let level = LevelValue::from_f64(factor.tag(), snapped).ok_or_else(out)?;
    if level_in_domain(factor, &level).unwrap_or(false) {
        Ok(level)
    } else {
        Err(out())
    }
}

pub fn central_composite(spec: &CentralCompositeSpec) -> Result<DesignMatrix, DesignError> {
    let k = spec.axes.len();
    if k == 0 {
        return Err(DesignError::Invalid("no varied factors".into()));
    }
    if spec.n_center == 0 {
        return Err(DesignError::Invalid("at least one centre point is required".into()));
    }
    if !(spec.alpha > 0.0) {
        return Err(DesignError::Invalid("alpha must be positive".into()));
    }
    if spec.corners == CornerKind::Fractional && k < 3 {
        return Err(DesignError::Invalid("fractional corners need at least three factors".into()));
    }
    for a in &spec.axes {
        if !(a.step > 0.0) {
            return Err(DesignError::Invalid(format!("step for {} must be positive", a.factor.name)));
        }
    }
    let mut factors: Vec<Factor> = spec.axes.iter().map(|a| a.factor.clone()).collect();
    factors.extend(spec.fixed.iter().map(|(f, _)| f.clone()));

    let point = |coded: &[f64], kind: RowKind| -> Result<DesignRow, DesignError> {
        let mut levels = Vec::with_capacity(factors.len());
        for (a, &c) in spec.axes.iter().zip(coded) {
            levels.push(snap_to_legal(&a.factor, a.centre + c * a.step)?);
        }
        levels.extend(spec.fixed.iter().map(|(_, l)| l.clone()));
        Ok(DesignRow {
            levels,
            coded: coded.to_vec(),
            kind,
        })
    };

    let mut rows = Vec::new();
    for _ in 0..spec.n_center {
        rows.push(point(&vec![0.0; k], RowKind::Centre)?);
    }
    for i in 0..k {
        for sign in [-1i8, 1] {
            let mut c = vec![0.0; k];
            c[i] = sign as f64 * spec.alpha;
            rows.push(point(&c, RowKind::Star { factor: i, sign })?);
        }
    }
    let free = match spec.corners {
        CornerKind::Full => k,
        CornerKind::Fractional => k - 1,
    };
    for n in 0..(1usize << free) {
        // Yates order: the first factor alternates fastest.
        let mut c: Vec<f64> = (0..free).map(|b| if (n >> b) & 1 == 1 { 1.0 } else { -1.0 }).collect();
        if free < k {
            c.push(c.iter().product());
        }
        rows.push(point(&c, RowKind::Corner)?);
    }
    Ok(DesignMatrix {
        factors,
        rows,
        kind: DesignKind::CentralComposite,
        replications: 1,
    })
}
