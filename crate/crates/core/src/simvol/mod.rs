//! Interval bounds for simplicial volume, propagated through manifold
//! expressions.
//!
//! Leaves carry exact values (surfaces, hyperbolic manifolds via
//! proportionality) or user intervals; products and connected sums combine
//! them. Every constant that is configured rather than derived is recorded in
//! the result's trace.

mod eval;
mod parse;

use thiserror::Error;

pub use eval::{
    binomial, degree_bound, euler_bound, evaluate, BoundInterval, ConstantOrigin, ConstantUse, DegreeBound,
    EvalConfig, TraceStep, V2, V3,
};
pub use parse::{parse, Expr, ExprKind, Position};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimvolError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("semantic error at line {line}, column {column}: {message}")]
    Semantic { line: usize, column: usize, message: String },
    #[error("no volume constant v_{dim} is shipped or configured")]
    UnknownConstant { dim: usize },
    #[error("degree bound needs equal dimensions, got {source_dim} and {target_dim}")]
    DimensionMismatch { source_dim: usize, target_dim: usize },
    #[error("target has simplicial volume lower bound 0; no degree bound follows")]
    Indeterminate,
}

/// Parses and evaluates in one step.
pub fn evaluate_str(text: &str, config: &EvalConfig) -> Result<BoundInterval, SimvolError> {
    evaluate(&parse(text)?, config)
}
