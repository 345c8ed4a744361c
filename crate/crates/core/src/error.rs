use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported field degree {0} (supported: 1..=20)")]
    UnsupportedFieldDegree(u32),
    #[error("field mismatch: GF(2^{left}) vs GF(2^{right})")]
    FieldMismatch { left: u32, right: u32 },
    #[error("{0} is not a power of two")]
    NotPowerOfTwo(u64),
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("{what} {value} out of range (must be < {bound})")]
    OutOfRange {
        what: &'static str,
        value: u64,
        bound: u64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid moment sequence: {0}")]
    InvalidMoments(String),
    #[error("enumeration budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("rule weights are not multiples of 1/{0}")]
    RuleNotRounded(u64),
    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    /// Stable snake-case tag for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnsupportedFieldDegree(_) => "unsupported_field_degree",
            Error::FieldMismatch { .. } => "field_mismatch",
            Error::NotPowerOfTwo(_) => "not_power_of_two",
            Error::NotPrime(_) => "not_prime",
            Error::OutOfRange { .. } => "out_of_range",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidMoments(_) => "invalid_moments",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::InvalidDensity(_) => "invalid_density",
            Error::RuleNotRounded(_) => "rule_not_rounded",
            Error::Parse(_) => "parse",
        }
    }
}
