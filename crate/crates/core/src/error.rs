use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("design matrix is singular (singular value ratio {ratio:.3e})")]
    SingularDesign { ratio: f64 },

    #[error("insufficient data: {n} observations for {k} parameters")]
    InsufficientData { n: usize, k: usize },

    #[error("degenerate fit: residual sum of squares is {rss:.3e}, variance estimate collapses")]
    DegenerateFit { rss: f64 },

    #[error("small-sample correction undefined: need n > k + 1, got n = {n}, k = {k}")]
    SmallSample { n: usize, k: usize },

    #[error("second-moment matrix is not symmetric positive semidefinite: {0}")]
    NotPositiveSemidefinite(String),

    #[error("quadrature did not reach tolerance {tolerance:e} (estimated relative error {estimate:.3e})")]
    QuadratureFailure { tolerance: f64, estimate: f64 },

    #[error("scores are not comparable: {0}")]
    IncomparableScores(String),

    #[error("too many degenerate replicates: {redraws} redraws exceed the cap of {cap}")]
    RedrawCapExceeded { redraws: usize, cap: usize },

    #[error("failed to format report: {0}")]
    Report(String),
}
