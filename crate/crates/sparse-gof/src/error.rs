//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the library.
///
/// Variants split into two families: input/contract violations
/// ([`Error::is_validation`]) and guard/budget refusals
/// ([`Error::is_refusal`]). Callers that map errors to process exit
/// codes can use those predicates.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("moment order {order} outside supported range {min}..={max}")]
    OrderOutOfRange { order: u32, min: u32, max: u32 },

    #[error("rate must be positive and finite, got {0}")]
    InvalidRate(f64),

    #[error("mass tolerance must lie in (0, {max}], got {got}")]
    InvalidMassTolerance { got: f64, max: f64 },

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("sample size must be positive")]
    EmptySample,

    #[error("declared sample size {declared} does not match summed counts {summed}")]
    CountMismatch { declared: u64, summed: u64 },

    #[error("cumulant vector is not standardized (C1 = {c1}, C2 = {c2})")]
    NotStandardized { c1: f64, c2: f64 },

    #[error("degenerate profile: corrected variance {0} is not positive")]
    DegenerateProfile(f64),

    #[error("chi-square statistic value must be non-negative, got {0}")]
    NegativeStatistic(f64),

    #[error("argument {name} = {value} is out of range: {requirement}")]
    ArgumentOutOfRange {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("enumeration would produce {outcomes} outcomes, above the {limit} guard")]
    EnumerationTooLarge { outcomes: u128, limit: u64 },

    #[error("truncated summation did not converge after {terms} terms (rate {lambda})")]
    TruncationFailure { lambda: f64, terms: u64 },

    #[error("replication count {requested} is below the floor of {minimum}")]
    ReplicationFloor { requested: u64, minimum: u64 },

    #[error("simulation budget exceeded: needs {required} statistic evaluations, budget is {budget}; lower replications or shrink the x grid")]
    BudgetExceeded { required: u64, budget: u64 },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by invalid inputs or violated contracts.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::EnumerationTooLarge { .. }
                | Error::TruncationFailure { .. }
                | Error::ReplicationFloor { .. }
                | Error::BudgetExceeded { .. }
        )
    }

    /// True for guard or budget refusals on otherwise well-formed input.
    pub fn is_refusal(&self) -> bool {
        !self.is_validation()
    }
}
