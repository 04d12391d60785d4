//! Numeric analysis: signal-to-noise ratios, effects, ANOVA, regression,
//! optimum prediction and rank validation.

pub mod anova;
pub mod dist;
pub mod effects;
pub mod kendall;
pub mod optimum;
pub mod regression;
pub mod snr;

pub use anova::{one_way_anova, Anova};
pub use effects::{control_by_noise, interaction_table, main_effects, ControlByNoiseRow};
pub use kendall::{kendall_tau, RankValidation};
pub use optimum::{predict_optimum, OptimumResult, Region};
pub use regression::{backward_eliminate, fit_regression, Observations, RegressionModel, Term};
pub use snr::{normalize_responses, snr_larger_better};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("response {0} is not positive; the larger-is-better ratio needs positive responses")]
    NonPositive(f64),
    #[error("no responses")]
    Empty,
    #[error("normalizer must be positive, got {0}")]
    BadNormalizer(f64),
    #[error("each group needs at least two observations")]
    SmallGroup,
    #[error("{observations} observations cannot support {terms} terms")]
    TooFewObservations { observations: usize, terms: usize },
    #[error("design is rank deficient: {0} depends on earlier terms")]
    RankDeficient(String),
    #[error("term refers to unknown factor index {0}")]
    UnknownFactor(usize),
    #[error("missing level for factor {0}")]
    MissingFactor(String),
    #[error("rankings differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("rankings contain ties")]
    Ties,
    #[error("too many factors ({0}) for exhaustive optimum search")]
    TooManyFactors(usize),
    #[error("no region bound for factor {0}")]
    NoRegion(String),
    #[error("non-finite value in input")]
    NonFinite,
}
