use thiserror::Error;

/// Errors produced by the geometric and numerical operations of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate point: {0}")]
    DuplicatePoint(String),
    #[error("degenerate cross ratio: lambda = {0} lies in {{0, 1}}")]
    DegenerateCrossRatio(f64),
    #[error("supplied plane is not transverse to the pencil axis")]
    NotTransverse,
    #[error("invalid pencil: {0}")]
    InvalidPencil(String),
    #[error("angle sum violates allowability: sum = {sum}, expected 2*pi")]
    NotAllowable { sum: f64 },
    #[error("angle out of the open interval (0, pi): theta[{index}] = {value}")]
    OutOfRange { index: usize, value: f64 },
    #[error("incompatible X-branch angles: |theta1+theta3-theta2-theta4| = {residual}")]
    Incompatible { residual: f64 },
    #[error("degenerate sheet configuration: {0}")]
    DegenerateSheet(String),
    #[error("degenerate angle triple: {0}")]
    DegenerateTriple(String),
    #[error("triple lies on the excluded locus (some theta_i = pi/2 or theta_i = theta_j)")]
    ExcludedLocus,
    #[error("pinned lines are degenerate (parallel)")]
    PinnedDegenerate,
    #[error("radial direction lies in the tangent space; projection along it is undefined")]
    ProjectionSingular,
    #[error("image point is not on the target patch (distance {distance})")]
    PointNotOnTarget { distance: f64 },
    #[error("basis dimensions disagree: {0}")]
    BasisMismatch(String),
    #[error("radial line not preserved: angle between d_phi(U) and U' is {angle}")]
    RadialLineNotPreserved { angle: f64 },
    #[error("vertex {0} is not a branch vertex")]
    NotABranch(String),
    #[error("curve {0} has too few polyline points for tangent estimation")]
    InsufficientPolylinePoints(String),
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("invariant violation at {location}: {message}")]
    InvariantViolation { location: String, message: String },
    #[error("boundary polyline is not simple")]
    NotSimple,
    #[error("too few boundary points: {0} (need at least 16)")]
    TooFewPoints(usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
