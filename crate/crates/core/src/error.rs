use thiserror::Error;

/// Errors raised by the grasp-planning library.
#[derive(Debug, Error)]
pub enum GraspError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("no stable contact pair found")]
    NoStableGrasp,

    #[error("feature encoding failed: {0}")]
    Encoding(String),

    #[error("class {class_id} has too few examples ({positives} positive, {negatives} negative)")]
    DegenerateDataset {
        class_id: usize,
        positives: usize,
        negatives: usize,
    },

    #[error("could not place object {object} after {attempts} attempts")]
    PlacementFailure { object: usize, attempts: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema mismatch: expected {expected}, found {found}")]
    Schema { expected: String, found: String },

    #[error("malformed record: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GraspError {
    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            GraspError::DegenerateInput(_) => "degenerate-input",
            GraspError::InvalidPolygon(_) => "invalid-polygon",
            GraspError::NoStableGrasp => "no-stable-grasp",
            GraspError::Encoding(_) => "encoding",
            GraspError::DegenerateDataset { .. } => "degenerate-dataset",
            GraspError::PlacementFailure { .. } => "placement-failure",
            GraspError::Config(_) => "config",
            GraspError::Schema { .. } => "schema",
            GraspError::Format(_) => "format",
            GraspError::Io(_) => "io",
            GraspError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, GraspError>;
