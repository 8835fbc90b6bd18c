use alloc::string::String;
use alloc::vec::Vec;

use crate::game::Violation;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid evaluation: total mass {mass} is neither 0 nor 1")]
    Mass { mass: f64 },

    #[error("invalid evaluation: weight {weight} at stage {stage}")]
    Weight { stage: usize, weight: f64 },

    #[error("breakpoints must start at 1 and increase strictly")]
    Breakpoints,

    #[error("parameter `{name}` out of range: {value}")]
    Parameter { name: &'static str, value: f64 },

    #[error("{what} exceeds the supported size {limit}")]
    Size { what: &'static str, limit: usize },

    #[error("precondition failed: {0}")]
    Precondition(&'static str),

    #[error("invalid game ({} violation(s)), first: {}", .0.len(), .0[0])]
    InvalidGame(Vec<Violation>),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("index {index} out of range for {what} of size {size}")]
    Index { what: &'static str, index: usize, size: usize },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("optimality certificate gap {gap:e} exceeds tolerance {tol:e}")]
    Certificate { gap: f64, tol: f64 },

    #[error("fixed-point iteration stopped after {iterations} iterations with bound {bound:e}")]
    NotConverged { iterations: usize, bound: f64 },

    #[error("map failed the 1-Lipschitz spot check (ratio {ratio})")]
    Lipschitz { ratio: f64 },

    #[error("unknown corpus game `{0}`")]
    UnknownGame(String),

    #[error("strategy has no action for stage {stage}")]
    HorizonShortfall { stage: usize },

    #[error("unsupported: {0}")]
    Unsupported(&'static str),
}
