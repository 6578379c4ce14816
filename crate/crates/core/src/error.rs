use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid weight parameters: {0}")]
    InvalidParams(String),

    #[error("window [{l_min}, {l_max}] must satisfy l_min <= 0 <= l_max")]
    InvalidWindow { l_min: i64, l_max: i64 },

    #[error("core length {got} does not match window length {expected}")]
    CoreLength { expected: usize, got: usize },

    #[error("tail polynomial disagrees with core value at l = {l} (|diff| = {diff:e})")]
    TailDiscontinuity { l: i64, diff: f64 },

    #[error("tail polynomial degree {degree} exceeds the cap of {cap}")]
    DegreeOverflow { degree: usize, cap: usize },

    #[error("unsupported input: {0}")]
    UnsupportedInput(&'static str),

    #[error("Hilbert-Schmidt sum diverges: condition {violated} is violated")]
    Divergent { violated: &'static str },

    #[error("parameters are not admissible: {0}")]
    NotAdmissible(String),

    #[error("beta vanishes at l = {l}")]
    BetaVanishes { l: i64 },

    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("identity mismatch in {what}: {detail}")]
    IdentityMismatch { what: &'static str, detail: String },

    #[error("could not certify {what} within {limit}")]
    Uncertified { what: &'static str, limit: String },

    #[error("matrix block of size {size} exceeds the dense SVD cap {cap}; use a window half-width <= {suggested}")]
    TooLarge { size: usize, cap: usize, suggested: i64 },

    #[error("malformed document: {0}")]
    Malformed(String),
}
