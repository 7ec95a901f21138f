use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown preset `{name}`; available: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("cannot parse preset `{0}`: {1}")]
    PresetSyntax(String, String),

    #[error("non-finite {what} at probe t={t}, z={z:?}")]
    NonFiniteCoefficient { what: String, t: f64, z: Vec<f64> },

    #[error("quadrature produced a non-finite value at z={0:?}")]
    Quadrature(Vec<f64>),

    #[error("non-finite particle state at step {step}, particle {particle}")]
    NonFiniteState { step: usize, particle: usize },

    #[error("common-noise fingerprint mismatch: solution {solution}, bundle {bundle}")]
    FingerprintMismatch { solution: String, bundle: String },

    #[error("stability bound violated at step {step}: courant number {courant:.4} > {limit}; reduce dt")]
    Stability { step: usize, courant: f64, limit: f64 },

    #[error("negative density {value:e} at step {step}, cell {cell}")]
    NegativeDensity { step: usize, cell: usize, value: f64 },

    #[error("Picard iteration did not converge in {max_iter} iterations; increments {increments:?}")]
    PicardDivergence { max_iter: usize, increments: Vec<f64> },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("out of numerical scope: {0}")]
    OutOfScope(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
