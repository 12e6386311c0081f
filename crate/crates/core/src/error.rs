use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A time query fell outside the stored record.
    #[error("time {time} outside valid interval [{lo}, {hi}]")]
    Range { time: f64, lo: f64, hi: f64 },

    /// The record or schedule is malformed (non-contiguous, non-monotone, ...).
    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A flow or jump map looked further back than the declared delay bound.
    #[error("lookback {offset} exceeds delay bound {bound}")]
    DelayBound { offset: f64, bound: f64 },

    /// Non-finite state or state norm beyond the divergence guard.
    #[error("trajectory diverged at t = {time} (|x| = {norm:e})")]
    Divergence { time: f64, norm: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// One or more theorem hypotheses fail for the supplied constants.
    #[error("{theorem} preconditions violated: {}", violations.join("; "))]
    Precondition {
        theorem: String,
        violations: Vec<String>,
    },

    #[error("no ISS witness found: {0}")]
    NoWitness(String),
}
