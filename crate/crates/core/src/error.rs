use thiserror::Error;

use crate::model::{Signal, Violation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("population is invalid: {}", format_violations(.0))]
    InvalidPopulation(Vec<Violation>),

    #[error("strategies are incompatible: {0}")]
    IncompatibleStrategies(String),

    #[error("position {position} for type {type_index} at signal {signal} lies outside [{lo}, {hi}]")]
    Inadmissible {
        type_index: usize,
        signal: Signal,
        position: f64,
        lo: f64,
        hi: f64,
    },

    #[error("the null signal has no integration interval")]
    NullSignal,

    #[error("interval lower bound exceeds upper bound")]
    InvalidInterval,

    #[error("integrand is not finite at node {index} (e_c = {node})")]
    NonFinite { index: usize, node: f64 },

    #[error("probabilities must be nonnegative and sum to one (sum = {sum})")]
    InvalidProbabilities { sum: f64 },

    #[error("mean-jump evaluator unavailable: statistics were built from node values only")]
    NoMeanJumpProfile,
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
