use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: need at least 3 interior nodes, got {0}")]
    InvalidMesh(usize),

    #[error("region nesting violated: {0}")]
    RegionNesting(String),

    #[error("boundary layer radius r0 = {r0} overlaps omega0 (need r0 < {limit})")]
    R0Overlap { r0: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("tridiagonal solve broke down at step {step} (pivot {pivot:e} at row {row})")]
    SolverBreakdown { step: usize, row: usize, pivot: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    EigenNoConvergence { iterations: usize, residual: f64 },

    #[error("bisection bracket failure on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("mesh under-resolved: h = {h:e} exceeds eps/10 = {limit:e}")]
    UnderResolved { h: f64, limit: f64 },

    #[error("infeasible slope target {target}: largest feasible value is {max_feasible}")]
    InfeasibleSlope { target: f64, max_feasible: f64 },

    #[error("singular time t = {0}: weights are defined on the open interval (0, T)")]
    SingularTime(f64),

    #[error("property failure: {0}")]
    PropertyFailure(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("no admissible value: {0}")]
    Exhausted(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}
