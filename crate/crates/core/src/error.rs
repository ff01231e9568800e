use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} is out of range (expected {expected})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("unsupported: {0}")]
    UnsupportedFamily(&'static str),

    #[error("operation not supported for function kind `{0}`")]
    UnsupportedFunction(&'static str),

    #[error("design points {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },

    #[error("kernel produced a non-finite value")]
    NonFiniteKernel,

    #[error("bounding box has zero volume")]
    DegenerateBox,

    #[error("Halton sequences support at most {max} dimensions, got {found}")]
    TooManyDimensions { max: usize, found: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFiniteKernel | Error::Factorization(_))
    }
}
