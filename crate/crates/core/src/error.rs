use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("matrix is not irreducible ({components} strongly connected components); analyse each diagonal block separately")]
    Reducible { components: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("matrix is numerically singular (reciprocal condition estimate {rcond:.3e})")]
    Singular { rcond: f64 },

    #[error("regime mismatch: {0}")]
    Regime(String),

    #[error("open-case: c_mx*O_mx*alpha_1lambda = {value:.6} >= 1; the growth form of the mixed shares is unknown in this regime")]
    OpenCase { value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
