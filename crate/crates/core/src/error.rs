use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no configured prime covers a {0}-bit key domain")]
    UnsupportedDomain(u32),

    #[error("key {key} is outside the {bits}-bit hash domain")]
    KeyOutOfDomain { key: u64, bits: u32 },

    #[error("prefix {prefix} does not have bit-length {len}")]
    PrefixLength { prefix: u64, len: u32 },

    #[error("index {index} out of range for a universe of size {n}")]
    IndexOutOfRange { index: u64, n: u64 },

    #[error("outcome does not match design: {0}")]
    Mismatch(String),

    #[error("cannot flip {requested} bits, only {available} available")]
    NotEnoughBits { requested: usize, available: usize },

    #[error("verification needs {needed} checks, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("no tabulated prime is at least {0}")]
    PrimeTableExceeded(u64),

    #[error("all {copies} decoder copies exceeded their work budget")]
    RaceExhausted { copies: usize },

    #[error("outside the supported regime: {0}")]
    Regime(String),

    #[error("sketch was built without an estimate table")]
    EstimatesDisabled,

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
