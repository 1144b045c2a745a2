use thiserror::Error;

/// Errors raised by the synthesis toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Kepler iteration did not converge (M = {mean_anomaly}, e = {eccentricity})")]
    KeplerNonConvergence { mean_anomaly: f64, eccentricity: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("duplicate decision variable `{0}`")]
    DuplicateVariable(String),

    #[error("unknown decision variable id {0}")]
    UnknownVariable(usize),

    #[error("no value assigned to decision variable id {0}")]
    MissingAssignment(usize),

    #[error("degenerate target orbit (zero angular momentum)")]
    DegenerateOrbit,

    #[error("problem is infeasible (phase-one margin {margin:e})")]
    Infeasible { margin: f64 },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("no feasible thrust bound at or below {ceiling} N")]
    NoFeasibleBound { ceiling: f64 },

    #[error("trajectories cover different horizons ({a} s vs {b} s)")]
    HorizonMismatch { a: f64, b: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
