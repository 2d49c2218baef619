use thiserror::Error;

/// Errors raised anywhere in the calibration pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular Vandermonde matrix: {0}")]
    SingularMatrix(String),

    #[error("no maximum of the weight found inside the search region: {0}")]
    UnboundedSearch(String),

    #[error("local maximization failed to converge in [{lo}, {hi}]")]
    ConvergenceFailure { lo: f64, hi: f64 },

    #[error("every candidate node has a zero determinant or zero weight")]
    AllCandidatesSingular,

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("data mean is zero, the Beta likelihood is undefined")]
    ZeroMeanData,

    #[error("normalization constant underflowed (ln gamma = {0})")]
    QuadratureUnderflow(f64),

    #[error("forward model failed at node {node:?}: {message}")]
    ForwardModelFailure { node: Vec<f64>, message: String },

    #[error("node selection failed at N = {n}: {source}")]
    NodeSelectionFailure {
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("Kullback-Leibler divergence is unbounded: q vanishes where p = {0:e}")]
    UnboundedDivergence(f64),

    #[error("degenerate rate fit: {0}")]
    DegenerateFit(String),

    #[error("no start point with positive density in {0} prior draws")]
    ZeroDensityStart(usize),

    #[error("Burgers solution has no sign change")]
    NoSignChange,

    #[error(
        "Burgers nonlinear solve stalled at residual {residual:e} after {iterations} iterations"
    )]
    NonlinearSolveFailure { residual: f64, iterations: usize },

    #[error("config error at {key} (line {line}): {message}")]
    Config {
        key: String,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
