use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} outside supported range 1..={max}", max = crate::simcore::MAX_QUBITS)]
    QubitRange(usize),
    #[error("qubit index {index} invalid for a {num_qubits}-qubit register")]
    QubitIndex { index: usize, num_qubits: usize },
    #[error("two-qubit gate needs distinct qubits, got control = target = {0}")]
    SameQubit(usize),
    #[error("qubit count mismatch: expected {expected}, got {got}")]
    QubitMismatch { expected: usize, got: usize },
    #[error("amplitude vector of length {0} is not a normalized power-of-two state")]
    InvalidState(usize),
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("parameter index {index} out of range for {len} parameters")]
    ParamIndex { index: usize, len: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("linear system is singular after repair (min eigenvalue {min_eigenvalue:e})")]
    Singular { min_eigenvalue: f64 },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("labels must contain both classes")]
    DegenerateLabels,
    #[error("labels must be -1 or +1, got {0}")]
    InvalidLabel(f64),
    #[error("feature `{name}` (column {index}) has zero variance in the training data")]
    DegenerateFeature { index: usize, name: &'static str },
    #[error("feature vector is at stage {got:?}, expected {expected:?}")]
    WrongStage { expected: crate::flowfeat::Stage, got: crate::flowfeat::Stage },
    #[error("invalid flow record: {0}")]
    InvalidFlow(String),
    #[error("observable not supported in shot mode: {0}")]
    UnsupportedObservable(String),
    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("missing mandatory column(s): {0}")]
    MissingColumns(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown model tag `{0}`")]
    UnknownModel(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
