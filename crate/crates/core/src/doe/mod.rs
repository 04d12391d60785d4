//! Run plans: orthogonal arrays, factor allocation, full factorials and
//! central composite designs.

pub mod allocate;
pub mod catalog;
pub mod ccd;
pub mod design;

pub use allocate::{allocate_factors, check_allocation, Allocation};
pub use catalog::{catalog, catalog_lookup, OrthogonalArray};
pub use ccd::{central_composite, default_alpha, CcdAxis, CentralCompositeSpec, CornerKind};
pub use design::{
    build_design_matrix, full_factorial, randomized_run_order, DesignKind, DesignMatrix, DesignRow, RowKind,
    DEFAULT_FACTORIAL_CAP,
};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DesignError {
    #[error("no catalog array has {levels} levels and {needed_columns} columns")]
    NoArray { levels: u8, needed_columns: usize },
    #[error("{0} has no interaction table")]
    NoInteractionTable(&'static str),
    #[error("invalid column pair ({i}, {j}) for {array}")]
    BadColumns { array: &'static str, i: usize, j: usize },
    #[error("no valid allocation on {0}")]
    NoAllocation(&'static str),
    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),
    #[error("factor {factor} has no level for coded level {coded}")]
    MissingLevel { factor: String, coded: u8 },
    #[error("full factorial has {count} rows, above the cap of {cap}")]
    TooLarge { count: u128, cap: usize },
    #[error("{factor}: point {value} falls outside the factor range after rounding")]
    OutOfRange { factor: String, value: f64 },
    #[error("invalid design: {0}")]
    Invalid(String),
}
