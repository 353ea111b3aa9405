use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while validating inputs or running a computation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("entry {index} is negative or not finite ({value})")]
    NegativeEntry { index: usize, value: f64 },
    #[error("row {row} sums to {sum}, outside the 1e-12 tolerance")]
    RowSumOutOfTolerance { row: usize, sum: f64 },
    #[error("channel class has no members")]
    EmptyClass,
    #[error("envelope entry {index} has pmax = {pmax} but pmin = 0")]
    DegenerateEnvelope { index: usize, pmax: f64 },
    #[error("no input law for user {user} at rate index {rate}")]
    MissingLaw { user: usize, rate: usize },
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("unknown identifier `{0}`")]
    UnknownId(String),
    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),
    #[error("operation region is infeasible ({violations} rate constraints violated)")]
    InfeasibleRegion { violations: usize },
    #[error("class conversion fails: {count} rate vectors cover a class only partially")]
    C1Violation { count: usize },
    #[error("search space of {size} exceeds the limit {limit}")]
    SearchSpaceTooLarge { size: u128, limit: u128 },
    #[error("codebook would hold {count} codewords, limit is {limit}")]
    TooManyCodewords { count: u128, limit: u128 },
    #[error("output enumeration of {size} sequences exceeds the limit {limit}")]
    EnumerationTooLarge { size: u128, limit: u128 },
    #[error("threshold undefined: expectation vanishes at position {position} (symbol {symbol})")]
    DegenerateLikelihood { position: usize, symbol: usize },
}

impl Error {
    /// True for errors raised by size guards rather than bad inputs.
    pub fn is_guard(&self) -> bool {
        matches!(
            self,
            Error::SearchSpaceTooLarge { .. }
                | Error::TooManyCodewords { .. }
                | Error::EnumerationTooLarge { .. }
        )
    }
}
