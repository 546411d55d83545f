use alloc::string::String;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point lies on the camera's principal plane")]
    DegenerateProjection,
    #[error("need at least 2 views, got {0}")]
    InsufficientViews(usize),
    #[error("triangulation system is ill-conditioned")]
    IllConditioned,
    #[error("no view pair reached a consensus of 2 or more inliers")]
    NoConsensus,
    #[error("camera centers coincide")]
    CoincidentCenters,
    #[error("heatmap has no positive value")]
    EmptyHeatmap,
    #[error("index {index} out of range for {len} keypoints")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("labeled pool is empty")]
    EmptyPool,
    #[error("budget {budget} exceeds the {available} selectable frames")]
    BudgetExceedsPool { budget: usize, available: usize },
    #[error("{got} poses cannot form {k} clusters")]
    TooFewPoses { got: usize, k: usize },
    #[error("cluster counts sum to zero")]
    EmptyCounts,
    #[error("invalid camera: {0}")]
    InvalidCamera(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
