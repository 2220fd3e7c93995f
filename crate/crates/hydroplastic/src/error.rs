//! Error types shared across the solver and simulator.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("operation unsupported for this EOS: {0}")]
    Unsupported(String),

    #[error("non-hyperbolic state: c^2 = {c2} <= 0 at rho = {rho}, p = {p}")]
    NonHyperbolic { rho: f64, p: f64, c2: f64 },

    #[error("yield limit state undefined: {0}")]
    LimitUndefined(String),

    #[error("constitutive violation: effective stress {s_eff} exceeds plastic yield {y_p}")]
    ConstitutiveViolation { s_eff: f64, y_p: f64 },

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("no sign change of the Hugoniot residual on ({rho_lo}, {rho_hi}] for q = {q}; convexity conditions may be violated")]
    Bracket { q: f64, rho_lo: f64, rho_hi: f64 },

    #[error("iteration did not converge after {iterations} steps (last iterates: {trace:?})")]
    NonConvergence { iterations: usize, trace: Vec<f64> },

    #[error("Hugoniot locus degenerate: compression bound violated at rho = {rho}")]
    LocusDegenerate { rho: f64 },

    #[error("wave classification unsupported: {0}")]
    ClassificationUnsupported(String),

    #[error("Riemann problem inadmissible (vacuum would form): f(q_min) = {f_at_qmin} >= 0")]
    Vacuum { f_at_qmin: f64 },

    #[error("stress {q} lies below the rarefaction cut-off stress (vacuum side)")]
    VacuumSide { q: f64 },

    #[error("fan sampling failed: {0}")]
    Sampling(String),

    #[error("unsupported interface topology: {0}")]
    Topology(String),

    #[error("simulation aborted at cell {cell}: {reason}")]
    SimAbort { cell: usize, reason: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration ({field}): {message}")]
    Validation { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
