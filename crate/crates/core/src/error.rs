use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vector norm below 1e-12")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input is empty")]
    EmptyInput,
    #[error("invalid range [{lo}, {hi})")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("target {target} out of range for {classes} classes")]
    BadTarget { target: usize, classes: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("invalid loss config: {0}")]
    InvalidLossConfig(String),
    #[error("payload shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("lambda {0} outside [0.4, 0.6]")]
    LambdaOutOfRange(f64),
    #[error("need at least {needed} classes, found {found}")]
    InsufficientClasses { needed: usize, found: usize },
    #[error("unsupported payload: {0}")]
    UnsupportedPayload(String),
    #[error("invalid view transform spec: {0}")]
    InvalidViewSpec(String),
    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),
    #[error("class has no features")]
    EmptyClass,
    #[error("{available} samples available, {requested} requested{}", .class.map(|c| format!(" (class {c})")).unwrap_or_default())]
    NotEnoughSamples {
        class: Option<usize>,
        available: usize,
        requested: usize,
    },
    #[error("class {0} already has a prototype")]
    DuplicateClass(usize),
    #[error("prototype store is empty")]
    EmptyStore,
    #[error("infeasible protocol: {0}")]
    InfeasibleSpec(String),
    #[error("class {class} has {available} training samples, {requested} shots requested")]
    InsufficientShots {
        class: usize,
        available: usize,
        requested: usize,
    },
    #[error("split mismatch: {0}")]
    SplitMismatch(String),
    #[error("class {0} has no test samples")]
    MissingClass(usize),
    #[error("session has no incremental classes")]
    NoIncrementalClasses,
    #[error("need at least 2 sessions, got {0}")]
    TooFewSessions(usize),
    #[error("label {0} not in label space")]
    UnknownLabel(usize),
    #[error("{path}: parse error at {location}: {detail}")]
    Parse {
        path: PathBuf,
        location: String,
        detail: String,
    },
    #[error("labels are not contiguous from 0: missing {missing}")]
    NonContiguousLabels { missing: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),
    #[error("report schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("{path}: {detail}")]
    Io { path: PathBuf, detail: String },
}

impl Error {
    /// Stable machine-readable code printed by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ZeroVector => "E_ZERO_VECTOR",
            Error::DimensionMismatch { .. } => "E_DIMENSION",
            Error::EmptyInput => "E_EMPTY_INPUT",
            Error::InvalidRange { .. } => "E_INVALID_RANGE",
            Error::BadTarget { .. } => "E_BAD_TARGET",
            Error::EmptyBatch => "E_EMPTY_BATCH",
            Error::InvalidLossConfig(_) => "E_LOSS_CONFIG",
            Error::ShapeMismatch(_) => "E_SHAPE",
            Error::LambdaOutOfRange(_) => "E_LAMBDA",
            Error::InsufficientClasses { .. } => "E_INSUFFICIENT_CLASSES",
            Error::UnsupportedPayload(_) => "E_UNSUPPORTED_PAYLOAD",
            Error::InvalidViewSpec(_) => "E_VIEW_SPEC",
            Error::InvalidTrainConfig(_) => "E_TRAIN_CONFIG",
            Error::EmptyClass => "E_EMPTY_CLASS",
            Error::NotEnoughSamples { .. } => "E_NOT_ENOUGH_SAMPLES",
            Error::DuplicateClass(_) => "E_DUPLICATE_CLASS",
            Error::EmptyStore => "E_EMPTY_STORE",
            Error::InfeasibleSpec(_) => "E_INFEASIBLE_SPEC",
            Error::InsufficientShots { .. } => "E_INSUFFICIENT_SHOTS",
            Error::SplitMismatch(_) => "E_SPLIT_MISMATCH",
            Error::MissingClass(_) => "E_MISSING_CLASS",
            Error::NoIncrementalClasses => "E_NO_INCREMENTAL_CLASSES",
            Error::TooFewSessions(_) => "E_TOO_FEW_SESSIONS",
            Error::UnknownLabel(_) => "E_UNKNOWN_LABEL",
            Error::Parse { .. } => "E_PARSE",
            Error::NonContiguousLabels { .. } => "E_NON_CONTIGUOUS_LABELS",
            Error::EmptyDataset => "E_EMPTY_DATASET",
            Error::InvalidConfig(_) => "E_INVALID_CONFIG",
            Error::CheckpointMismatch(_) => "E_CHECKPOINT_MISMATCH",
            Error::SchemaMismatch(_) => "E_SCHEMA_MISMATCH",
            Error::Io { .. } => "E_IO",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.into(),
            detail: err.to_string(),
        }
    }
}
