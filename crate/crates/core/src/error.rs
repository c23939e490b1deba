use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("duplicate feature name `{0}`")]
    DuplicateFeatureName(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("angle undefined for (cos, sin) = (0, 0) at row {0}")]
    UndefinedAngle(usize),
    #[error("degenerate split: {train} train / {test} test rows")]
    DegenerateSplit { train: usize, test: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible correlation target {target}: measured {measured:.4}")]
    InfeasibleCorrelation { target: f64, measured: f64 },
    #[error("node {node} of tree {tree} has zero cover; cover statistics are required")]
    MissingCover { tree: usize, node: usize },
    #[error("too many features for exhaustive enumeration: {found} > {max}")]
    TooManyFeatures { found: usize, max: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}
