use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("fractional order s = {0} is outside (0, 1)")]
    InvalidOrder(f64),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("{nodes} interior nodes exceed the cap of {cap}")]
    TooManyNodes { nodes: usize, cap: usize },
    #[error("perturbation too large: C1 bound {0} is not below 1")]
    TooLarge(f64),
    #[error("perturbed boundary is not star-shaped about the center")]
    NotStarShaped,
    #[error("step {step}: C1 norm {norm} exceeds budget {budget}")]
    BudgetExceeded { step: usize, norm: f64, budget: f64 },
    #[error("stiffness is not positive definite after adding the potential")]
    IndefiniteForm,
    #[error("weight is not positive at node {0}")]
    NonPositiveWeight(usize),
    #[error("mass matrix is not positive definite")]
    CholeskyFailure,
    #[error("eigenvector matching is ambiguous at step {0}")]
    TrackingAmbiguous(usize),
    #[error("boundary density fit unstable at boundary node {node} (relative residual {residual:.3})")]
    FitUnstable { node: usize, residual: f64 },
    #[error("no dictionary element splits the cluster (best deviation {0:e})")]
    NoSplittingCandidate(f64),
    #[error("amplitude search failed after {0} halvings")]
    AmplitudeExhausted(usize),
    #[error("no success after {0} iterations")]
    MaxIterations(usize),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for errors caused by the user's input rather than by numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidOrder(_)
                | Error::InvalidDomain(_)
                | Error::InvalidArgument(_)
                | Error::Config { .. }
                | Error::Unsupported(_)
        )
    }
}
