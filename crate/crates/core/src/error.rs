use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by design construction, variance evaluation and estimation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid interval [{0}, {1}]: lower bound must be below upper bound")]
    InvalidInterval(f64, f64),

    #[error("invalid node set: {0}")]
    InvalidNodes(String),

    #[error("degenerate nodes: {0} and {1} are closer than the interval tolerance")]
    DegenerateNodes(f64, f64),

    #[error("unsupported degree {degree} (maximum {max})")]
    UnsupportedDegree { degree: usize, max: usize },

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("target {target} is not an extrapolation point for [{lo}, {hi}]")]
    NotExtrapolation { target: f64, lo: f64, hi: f64 },

    #[error("infinite variance: node {0} carries no observations")]
    InfiniteVariance(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(
        "insufficient replication: node {node} has {count} observations, at least 2 are required"
    )]
    InsufficientReplication { node: usize, count: usize },

    #[error("non-positive degrees of freedom ({0})")]
    NonPositiveDof(i64),

    #[error("collinear design matrix: X'Ω⁻¹X is singular")]
    CollinearDesign,

    #[error("covariance matrix is not symmetric positive-definite")]
    Covariance,

    #[error("simplification inapplicable: {0}")]
    SimplificationInapplicable(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable short name of the variant, used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidInterval(..) => "invalid-interval",
            Error::InvalidNodes(_) => "invalid-nodes",
            Error::DegenerateNodes(..) => "degenerate-nodes",
            Error::UnsupportedDegree { .. } => "unsupported-degree",
            Error::InvalidRequest(_) => "invalid-request",
            Error::NotExtrapolation { .. } => "not-extrapolation",
            Error::InfiniteVariance(_) => "infinite-variance",
            Error::Domain(_) => "domain",
            Error::InsufficientData(_) => "insufficient-data",
            Error::InsufficientReplication { .. } => "insufficient-replication",
            Error::NonPositiveDof(_) => "non-positive-dof",
            Error::CollinearDesign => "collinear-design",
            Error::Covariance => "covariance",
            Error::SimplificationInapplicable(_) => "simplification-inapplicable",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
