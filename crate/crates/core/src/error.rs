use thiserror::Error;

/// Errors produced by the denoising library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("image data length {len} does not match {width}x{height}")]
    BadLength { width: usize, height: usize, len: usize },

    #[error("image has zero width or height")]
    EmptyImage,

    #[error("non-finite value at pixel {index}")]
    NonFinite { index: usize },

    #[error("solver diverged at iteration {iteration} (time step too large?)")]
    Diverged { iteration: usize },

    #[error("image must have at least two pixels")]
    DegenerateImage,

    #[error("no truth pixel lies within {tol} of level {level}")]
    EmptyMask { level: f64, tol: f64 },

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("parameter grid is empty")]
    EmptyGrid,

    #[error("SURE value is not finite")]
    NonFiniteSure,

    #[error("every point of the SURE curve is non-finite")]
    AllNonFinite,

    #[error("pixel value {value} at index {index} is outside [0, 255]")]
    OutOfRange { index: usize, value: f64 },

    #[error("PGM error at byte {offset}: {kind}")]
    Pgm { offset: usize, kind: PgmErrorKind },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What went wrong while parsing a PGM stream.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PgmErrorKind {
    #[error("unsupported magic number {0:?}")]
    UnsupportedMagic(String),
    #[error("malformed header: {0}")]
    MalformedHeader(&'static str),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("sample {value} exceeds maxval {maxval}")]
    SampleOverMax { value: u32, maxval: u32 },
    #[error("malformed ascii sample")]
    BadSample,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: "finite and > 0",
        })
    }
}

pub(crate) fn check_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: "finite and >= 0",
        })
    }
}
