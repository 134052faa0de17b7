use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("matrix is not positive definite (pivot {pivot})")]
    SingularMatrix { pivot: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("confounder structure infeasible: gamma1 = {gamma1} < gamma2^2 = {}", gamma2 * gamma2)]
    InfeasibleConfounderStructure { gamma1: f64, gamma2: f64 },

    #[error("feedback loop is singular: beta_xy * beta_yx = {product}")]
    FeedbackSingular { product: f64 },

    #[error("separation detected: coefficient {coefficient} reached {value}")]
    SeparationDetected { coefficient: usize, value: f64 },

    #[error("design matrix is rank deficient")]
    RankDeficientDesign,

    #[error("probit fit did not converge after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        coefficients: Vec<f64>,
    },

    #[error("row alignment error: {left} rows vs {right} rows")]
    AlignmentError { left: usize, right: usize },

    #[error("identification infeasible: square-root arguments have signs ({sign_xy}, {sign_yx})")]
    InfeasibleIdentification { sign_xy: f64, sign_yx: f64 },

    #[error("degenerate ratio: {0}")]
    DegenerateRatio(&'static str),

    #[error("no real solution: {0}")]
    NoRealSolution(&'static str),

    #[error("quadratic leading coefficient vanishes")]
    QuadraticDegenerate,

    #[error("multiple candidate solutions satisfy the sign rule")]
    Unresolved,

    #[error("delta method left the feasible region when perturbing coordinate {coordinate}")]
    FeasibilityBoundary { coordinate: usize },

    #[error("{failures} of {replicates} bootstrap replicates failed")]
    ExcessiveFailureRate { failures: usize, replicates: usize },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "DOMAIN_ERROR",
            Error::SingularMatrix { .. } => "SINGULAR_MATRIX",
            Error::DimensionMismatch(_) => "DIMENSION_MISMATCH",
            Error::InvalidParameter(_) => "INVALID_PARAMETER",
            Error::InfeasibleConfounderStructure { .. } => "INFEASIBLE_CONFOUNDER_STRUCTURE",
            Error::FeedbackSingular { .. } => "FEEDBACK_SINGULAR",
            Error::SeparationDetected { .. } => "SEPARATION_DETECTED",
            Error::RankDeficientDesign => "RANK_DEFICIENT_DESIGN",
            Error::NotConverged { .. } => "NOT_CONVERGED",
            Error::AlignmentError { .. } => "ALIGNMENT_ERROR",
            Error::InfeasibleIdentification { .. } => "INFEASIBLE_IDENTIFICATION",
            Error::DegenerateRatio(_) => "DEGENERATE_RATIO",
            Error::NoRealSolution(_) => "NO_REAL_SOLUTION",
            Error::QuadraticDegenerate => "QUADRATIC_DEGENERATE",
            Error::Unresolved => "UNRESOLVED",
            Error::FeasibilityBoundary { .. } => "FEASIBILITY_BOUNDARY",
            Error::ExcessiveFailureRate { .. } => "EXCESSIVE_FAILURE_RATE",
            Error::Config(_) => "CONFIG_ERROR",
        }
    }

    /// Failures that a resampling or sweep loop tallies instead of aborting on.
    pub fn is_estimation_failure(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix { .. }
                | Error::SeparationDetected { .. }
                | Error::RankDeficientDesign
                | Error::NotConverged { .. }
                | Error::InfeasibleIdentification { .. }
                | Error::DegenerateRatio(_)
                | Error::NoRealSolution(_)
                | Error::QuadraticDegenerate
                | Error::Unresolved
                | Error::FeasibilityBoundary { .. }
        )
    }
}
