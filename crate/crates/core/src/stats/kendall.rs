//! Kendall rank correlation between two rankings of the same items.

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankValidation {
    pub tau: f64,
    /// Fraction of item pairs ordered the same way by both rankings.
    pub concordance: f64,
    pub concordant: usize,
    pub discordant: usize,
}

/// `a[i]` and `b[i]` are the two scores of item `i`. Ties are rejected.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<RankValidation, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::Empty);
    }
    let (mut c, mut d) = (0usize, 0usize);
    for i in 0..n {
        for j in (i + 1)..n {
            let s = (a[i] - a[j]) * (b[i] - b[j]);
            if s > 0.0 {
                c += 1;
            } else if s < 0.0 {
                d += 1;
            } else {
                return Err(StatsError::Ties);
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(RankValidation {
        tau: (c as f64 - d as f64) / pairs,
        concordance: c as f64 / pairs,
        concordant: c,
        discordant: d,
    })
}
