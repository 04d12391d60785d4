//! Larger-is-better signal-to-noise ratio and response normalization.

use super::StatsError;

/// `-10 log10(mean(1 / y^2))`, in decibels.
pub fn snr_larger_better(responses: &[f64]) -> Result<f64, StatsError> {
    if responses.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut acc = 0.0;
    for &y in responses {
        if !y.is_finite() {
            return Err(StatsError::NonFinite);
        }
        if y <= 0.0 {
            return Err(StatsError::NonPositive(y));
        }
        acc += 1.0 / (y * y);
    }
    Ok(-10.0 * (acc / responses.len() as f64).log10())
}

pub fn normalize_responses(responses: &[f64], alpha: f64) -> Result<Vec<f64>, StatsError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(StatsError::BadNormalizer(alpha));
    }
    Ok(responses.iter().map(|y| y / alpha).collect())
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}
