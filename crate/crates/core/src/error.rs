use thiserror::Error;

/// Errors raised by the simulation, analysis and solver routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("enumeration needs {needed} terms, budget is {budget}; fall back to Monte Carlo")]
    BudgetExceeded { needed: f64, budget: f64 },

    #[error("no utility supplied for support degree {0}")]
    MissingUtility(usize),

    #[error("tolerance {tolerance} is below the oracle noise floor {floor} (3x the largest standard error)")]
    BelowNoiseFloor { tolerance: f64, floor: f64 },

    #[error("linear system is singular (condition number {condition:e})")]
    Singular { condition: f64 },

    #[error("root finder failed: {0}")]
    NoRoot(String),

    #[error("support is infeasible: {0}")]
    InfeasibleSupport(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
