//! Tail probabilities for Student's t and Fisher's F.

use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

pub use statrs::function::gamma::ln_gamma;

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() || !(df > 0.0) {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let d = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * d.sf(t.abs())).clamp(0.0, 1.0)
}

/// Upper-tail probability of an F statistic with `(d1, d2)` degrees of freedom.
pub fn f_upper(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() || !(d1 > 0.0 && d2 > 0.0) {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    let d = FisherSnedecor::new(d1, d2).expect("positive degrees of freedom");
    d.sf(f).clamp(0.0, 1.0)
}
