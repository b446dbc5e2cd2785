use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    /// The system violates a structural rule; the rule ids are listed.
    #[error("invalid system: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),

    #[error("block {block} is singular (|det| = {det:e})")]
    SingularBlock { block: &'static str, det: f64 },

    #[error("point x = {x} lies outside [0, 1]")]
    Domain { x: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("Neumann iteration did not converge after {iterations} iterations (last update {last_update:e})")]
    NonConvergence { iterations: usize, last_update: f64 },

    #[error("problem too large: {unknowns} unknowns exceed the cap of {cap}")]
    TooLarge { unknowns: usize, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Evaluation error tagged with the grid node where it happened.
    pub(crate) fn at_node(err: EvalError, component: usize, ix: usize, iy: usize, it: usize) -> Self {
        Error::Eval(err.with_context(format!("component {component}, node ({ix}, {iy}, {it})")))
    }
}
