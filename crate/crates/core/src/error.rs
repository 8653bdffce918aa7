use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An observation or query value was NaN or infinite.
    #[error("non-finite value {0}")]
    NonFinite(f64),

    /// A probability outside the open interval (0, 1).
    #[error("probability {0} outside (0, 1)")]
    ProbabilityRange(f64),

    /// A numeric parameter outside its admissible range.
    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    /// A batch whose length does not match the configured subgroup size.
    #[error("batch length {got}, expected {expected}")]
    BatchLength { expected: usize, got: usize },

    /// A sample too small for the requested statistic.
    #[error("sample size {got} below minimum {min}")]
    SampleSize { min: usize, got: usize },

    /// An unknown scoring-convention name.
    #[error("unknown convention `{0}`")]
    UnknownConvention(String),

    /// Incompatible configuration (e.g. a subgroup chart on an individual scorer).
    #[error("configuration error: {0}")]
    Config(String),

    /// A root or limit search could not bracket / reach its target.
    #[error("bracketing failed: {0}")]
    Bracketing(String),
}

pub type Result<T> = std::result::Result<T, Error>;
