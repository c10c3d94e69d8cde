use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `W(α) ≥ n`: the bias correction `[1 − W(α)/n]⁻¹` is undefined.
    #[error("degenerate correction at alpha = {alpha}: W = {w} >= n = {n}")]
    DegenerateCorrection { alpha: f64, w: f64, n: usize },

    #[error("envelope evaluated outside its domain: D = {d} < D(alpha_max) = {d_max}")]
    EnvelopeDomain { d: f64, d_max: f64 },

    #[error("regularizer family is not ordered: D increased from {prev} to {next} as alpha grew")]
    NonMonotone { prev: f64, next: f64 },

    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),

    #[error("oracle risk is zero; rho is infinite")]
    DegenerateOracle,

    #[error("eigendecomposition failed to converge")]
    EigenFailure,
}
