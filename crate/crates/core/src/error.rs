use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frame must contain at least one label")]
    EmptyFrame,
    #[error("frame has {0} labels; at most 64 are supported")]
    FrameTooLarge(usize),
    #[error("duplicate frame label `{0}`")]
    DuplicateLabel(String),
    #[error("label `{0}` is not part of the frame")]
    UnknownLabel(String),
    #[error("operands are bound to different frames")]
    FrameMismatch,

    #[error("the empty set cannot carry mass")]
    EmptyFocalElement,
    #[error("focal masses sum to {sum}, expected 1")]
    MassSumOutOfTolerance { sum: f64 },
    #[error("focal element listed more than once")]
    DuplicateFocalElement,
    #[error("mass {0} is not a finite positive number")]
    InvalidMass(f64),
    #[error("support {0} is outside (0, 1)")]
    InvalidSupport(f64),
    #[error("a simple support function needs a focus that is neither empty nor the whole frame")]
    InvalidFocus,
    #[error("total conflict: combination is undefined")]
    TotalConflict,
    #[error("at least one item is required")]
    EmptyInput,

    #[error("timestamp {0} must be finite and non-negative")]
    InvalidTimestamp(f64),
    #[error("report timestamp lies after the evaluation time")]
    NegativeAge,
    #[error("duplicate report id `{0}`")]
    DuplicateReportId(String),
    #[error("unknown report id `{0}`")]
    UnknownReportId(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("at least two reports are required, got {0}")]
    TooFewReports(usize),
    #[error("interaction matrix is identically zero")]
    DegenerateMatrix,
    #[error("annealing stopped after {outer_steps} temperature steps without saturating")]
    NoConvergence { outer_steps: usize },
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),
    #[error("benchmark size K={0} is outside 1..=16")]
    KOutOfRange(usize),
    #[error("a weight of conflict is infinite (a conflict equals 1)")]
    InfiniteWeight,

    #[error("every cluster has zero plausibility")]
    AllImplausible,
    #[error("partition has no non-empty cluster")]
    DegeneratePartition,
    #[error("prototype table has no active cluster")]
    EmptyTable,

    #[error("snapshot schema mismatch: {0}")]
    SchemaVersionMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}
