use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("label column `{column}` is not binary: found {found} distinct values")]
    NonBinaryLabel { column: String, found: usize },
    #[error("cannot parse `{value}` in column `{column}` (row {row}) as a number")]
    UnparseableNumber { column: String, row: usize, value: String },
    #[error("class {label} has {count} examples; at least {needed} required")]
    InsufficientClass { label: u8, count: usize, needed: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("label vectors are not aligned on example ids")]
    MisalignedIds,
    #[error("labels must be 0 or 1, found {0}")]
    InvalidLabel(u8),
    #[error("score {0} outside the open interval (0, 1)")]
    ScoreOutOfRange(f64),
    #[error("training diverged at epoch {epoch}: non-finite parameter")]
    Diverged { epoch: usize },
    #[error("undefined: {0}")]
    Undefined(&'static str),
    #[error("instance has no active features")]
    NoActiveFeatures,
    #[error("ridge system is singular")]
    SingularSystem,
    #[error("explanations refer to different examples: `{0}` vs `{1}`")]
    ExampleMismatch(String, String),
    #[error("unsupported schema_version {0}")]
    SchemaVersion(u64),
    #[error("model kind mismatch: expected {expected}, found {found}")]
    ModelKind { expected: &'static str, found: String },
    #[error("subset size {requested} exceeds available {available}")]
    SubsetTooLarge { requested: usize, available: usize },
    #[error("unknown example id `{0}`")]
    UnknownExample(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
