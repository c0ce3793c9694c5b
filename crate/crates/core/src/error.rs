use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its valid domain.
    InvalidParameter(&'static str),
    /// A probability vector is negative somewhere or does not sum to one.
    InvalidDistribution,
    /// Not enough samples or points for the requested estimate.
    InsufficientData { needed: u64, available: u64 },
    /// The overlap constant reached one, so the uncertainty bound is vacuous.
    OverlapSaturated { product: f64 },
    /// The seed pool ran dry.
    SeedExhausted { needed: u64, available: u64 },
    /// A block of zero measurements was requested.
    EmptyBlock,
    /// Input length does not match the extractor or matrix dimensions.
    LengthMismatch { expected: usize, actual: usize },
    /// The certified bound leaves nothing to extract.
    NothingExtractable { h_low: f64 },
    /// The calibration data has no linear region.
    NoLinearRegion,
    /// Sample tags disagree with the selected check instants.
    TagMismatch { position: u64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::InvalidDistribution => {
                write!(f, "probabilities must be non-negative and sum to one")
            }
            Error::InsufficientData { needed, available } => {
                write!(f, "insufficient data: need {needed}, have {available}")
            }
            Error::OverlapSaturated { product } => write!(
                f,
                "overlap constant saturates at bin-width product {product}; the bound is vacuous"
            ),
            Error::SeedExhausted { needed, available } => {
                write!(f, "seed exhausted: need {needed} bits, {available} left")
            }
            Error::EmptyBlock => write!(f, "requested an empty sample block"),
            Error::LengthMismatch { expected, actual } => {
                write!(f, "length mismatch: expected {expected}, got {actual}")
            }
            Error::NothingExtractable { h_low } => {
                write!(f, "min-entropy bound {h_low} leaves nothing to extract")
            }
            Error::NoLinearRegion => write!(f, "calibration data has no linear region"),
            Error::TagMismatch { position } => {
                write!(f, "quadrature tag at position {position} disagrees with check instants")
            }
        }
    }
}

impl core::error::Error for Error {}
