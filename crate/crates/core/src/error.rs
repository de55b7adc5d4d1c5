use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("divisor {value:e} below threshold at mode {mode:?}")]
    SmallDivisor { mode: Vec<i32>, value: f64 },
    #[error("frequency vector fails the Diophantine check at q={q:?}: |omega.q|={value:e}")]
    NonDiophantine { q: Vec<i32>, value: f64 },
    #[error("collocation grid {grid} too coarse for degree {degree}")]
    Aliasing { grid: usize, degree: usize },
    #[error("{what} did not converge after {iters} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iters: usize,
        residual: f64,
    },
    #[error("singular system in {0}")]
    Singular(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("point outside domain: {0}")]
    Domain(String),
    #[error("step size underflow at t={t}")]
    StepUnderflow { t: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
