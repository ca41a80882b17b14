use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed instance: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown node `{0}`")]
    DanglingNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("invalid link: {0}")]
    InvalidLink(String),
    #[error("session {session}: rate must be positive, got {rate}")]
    NonPositiveRate { session: usize, rate: f64 },
    #[error("session {0}: source and sink coincide")]
    DegenerateSession(usize),
    #[error("negative capacity {0}")]
    NegativeCapacity(f64),
    #[error("wireless instance declares no rate sets")]
    EmptyRateSets,
    #[error("instance field mismatch: {0}")]
    ModeMismatch(String),
    #[error("epsilon must lie in (0, 1/2), got {0}")]
    EpsilonOutOfRange(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown index tuple: {0}")]
    UnknownIndex(String),
    #[error("cannot average over zero rounds")]
    ZeroRounds,
    #[error("search space too large: estimated {estimate:.3e} assignments (cap {cap:.3e})")]
    SearchTooLarge { estimate: f64, cap: f64 },
    #[error("rate {rate} is not a multiple of grid step {grid}")]
    OffGrid { rate: f64, grid: f64 },
    #[error("internal invariant breach: {0}")]
    InvariantBreach(String),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
}

pub type Result<T> = std::result::Result<T, Error>;
