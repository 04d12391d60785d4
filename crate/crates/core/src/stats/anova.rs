//! One-way ANOVA for two groups.

use super::dist::f_upper;
use super::snr::mean;
use super::StatsError;

#[derive(Debug, Clone, PartialEq)]
pub struct Anova {
    pub f: f64,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
    /// Set when the within-group variance is zero.
    pub degenerate: bool,
}

pub fn one_way_anova(a: &[f64], b: &[f64]) -> Result<Anova, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::SmallGroup);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (ma, mb) = (mean(a), mean(b));
    let n = (a.len() + b.len()) as f64;
    let grand = (ma * a.len() as f64 + mb * b.len() as f64) / n;
    let ss_between = a.len() as f64 * (ma - grand).powi(2) + b.len() as f64 * (mb - grand).powi(2);
    let ss_within = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() + b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
    let df_within = a.len() + b.len() - 2;
    let scale = grand.abs().max(1.0);
    let degenerate = ss_within <= 1e-24 * scale * scale;
    let (f, p) = if degenerate {
        if ss_between > 1e-24 * scale * scale {
            (f64::INFINITY, 0.0)
        } else {
            (0.0, 1.0)
        }
    } else {
        let f = ss_between / (ss_within / df_within as f64);
        (f, f_upper(f, 1.0, df_within as f64))
    };
    Ok(Anova {
        f,
        p,
        df_between: 1,
        df_within,
        ss_between,
        ss_within,
        degenerate,
    })
}
