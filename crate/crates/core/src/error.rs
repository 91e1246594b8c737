//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus line {line}: {reason}")]
    MalformedCorpusLine { line: usize, reason: String },

    #[error("duplicate document id {id} on lines {first} and {second}")]
    DuplicateDocumentId { id: u64, first: usize, second: usize },

    #[error("insufficient label diversity: {found} distinct codes, {requested} requested")]
    InsufficientLabelDiversity { found: usize, requested: usize },

    #[error("unlabeled document {id} reached vectorization")]
    UnlabeledDocument { id: u64 },

    #[error("corpus too small to split: {n} documents")]
    CorpusTooSmall { n: usize },

    #[error("invalid split fractions: train={train}, validation={validation}")]
    InvalidSplitFractions { train: f64, validation: f64 },

    #[error("empty vocabulary: training documents contain no terms")]
    EmptyVocabulary,

    #[error("k exceeds distinct points: k={k}, distinct rows={distinct}")]
    KExceedsDistinctPoints { k: usize, distinct: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("shape mismatch: {reason}")]
    ShapeMismatch { reason: String },

    #[error("non-differentiable model: {kind}")]
    NonDifferentiableModel { kind: &'static str },

    #[error("probability {p} outside [0, 1]")]
    ProbabilityOutOfRange { p: f64 },

    #[error("cannot aggregate an empty score sequence")]
    EmptyAggregation,

    #[error("batch {batch} exceeds pool size {pool}")]
    BatchExceedsPool { batch: usize, pool: usize },

    #[error("two-stage candidate set ({candidates}) smaller than batch ({batch})")]
    CandidateSetTooSmall { candidates: usize, batch: usize },

    #[error("all clusters empty")]
    AllClustersEmpty,

    #[error("oracle restricted to training pool: id {id}")]
    OracleOutsideTrainingPool { id: u64 },

    #[error("unknown document id {id}")]
    UnknownDocumentId { id: u64 },

    #[error("label {code} has no positive example in the training split")]
    LabelCoverageImpossible { code: String },

    #[error("infeasible synthesis spec: {reason}")]
    InfeasibleSpec { reason: String },

    #[error("unknown strategy `{name}`")]
    UnknownStrategy { name: String },

    #[error("unknown model `{name}`")]
    UnknownModel { name: String },

    #[error("invalid experiment config: {reason}")]
    InvalidConfig { reason: String },

    #[error("model dump: {reason}")]
    ModelDump { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
