use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // provgraph
    #[error("malformed provenance document: {0}")]
    MalformedDocument(String),
    #[error("record {0} has no activities")]
    EmptyRecord(String),
    #[error("record {record_id} has cyclic activity precedence")]
    CyclicPrecedence { record_id: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    // taskgen
    #[error("cannot build candidate pools from an empty corpus")]
    EmptyCorpus,
    #[error("graph {0} fails the retention filter (needs one activity and one precursor)")]
    RetentionFilterFailed(String),
    #[error("item {item_id}: gold option does not match the source graph ({detail})")]
    GoldMismatch { item_id: String, detail: String },
    #[error("item {item_id}: distractor {option} satisfies every precedence constraint")]
    DistractorViolationMissing { item_id: String, option: usize },

    // splitter
    #[error("test partition of {0} is empty")]
    EmptyTestPartition(String),

    // memory / retrieval / scoring
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("step library is empty")]
    EmptyLibrary,
    #[error("process memory is empty")]
    EmptyMemory,
    #[error("graph {0} is not part of the training partition")]
    TrainLeak(String),
    #[error("embedder unavailable: {0}")]
    EmbedderUnavailable(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("option arity mismatch: {left} vs {right}")]
    ArityMismatch { left: usize, right: usize },

    // runner
    #[error("prompt is missing context: {0}")]
    MissingContext(String),
    #[error("chat client timed out after {0} attempts")]
    ClientTimeout(usize),
    #[error("chat endpoint error: {0}")]
    Endpoint(String),
    #[error("invalid ablation axis: {0}")]
    InvalidGridAxis(String),
    #[error("unknown item id {0}")]
    UnknownItemId(String),

    // cli
    #[error("unknown command {0}")]
    UnknownCommand(String),
    #[error("conflicting configuration: {0}")]
    ConfigConflict(String),
    #[error("unsupported file format in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
