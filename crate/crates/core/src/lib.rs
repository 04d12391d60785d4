//! Design, execution and analysis of configuration-tuning experiments.
//!
//! An experiment description names the factors of a target system and its
//! conditions of use, the fitness metrics it reports, and a search strategy.
//! The coordinator asks the strategy for combinations, drives the target through
//! an external-command protocol (or a seeded synthetic surface), and records
//! every trial in an incrementally written store that can be resumed and
//! analyzed later.

pub mod coordinator;
pub mod description;
pub mod doe;
pub mod harness;
pub mod model;
pub mod report;
pub mod stats;
pub mod store;
pub mod strategy;
mod xml;

pub use description::{parse_experiment_description, serialize_experiment_description, DescriptionError};
pub use model::{enumerate_levels, level_in_domain, Combination, ExperimentDescription, Factor, LevelValue};
