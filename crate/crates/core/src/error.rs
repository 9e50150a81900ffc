//! Crate-wide error type.

/// Errors produced by reconstruction primitives.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("grid side {0} is not a power of two")]
    NonPowerOfTwo(usize),

    #[error("{levels} decomposition levels exceed log2({size}) = {max}")]
    TooManyLevels { levels: u32, size: usize, max: u32 },

    #[error("projection has no samples above threshold (empty support)")]
    EmptySupport,

    #[error("projection {index} (angle {theta_rad} rad) has empty support")]
    EmptySupportAtAngle { index: usize, theta_rad: f64 },

    #[error("mask has no interior pixels")]
    EmptyMask,

    #[error("truth image is constant inside the mask (degenerate peak range)")]
    DegeneratePeak,

    #[error("step-size shrink loop exceeded {0} shrinks; operator/adjoint pair is likely inconsistent")]
    ShrinkCapExceeded(usize),

    #[error("invalid {what}: {detail}")]
    Invalid { what: &'static str, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
