use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("parameter `{0}` has no value")]
    UnboundParameter(String),
    #[error("point {point:?} lies outside the domain of `{manifold}`")]
    OutOfDomain { manifold: String, point: Vec<f64> },
    #[error("{function} is undefined at {value}")]
    InvalidArgument { function: &'static str, value: f64 },
    #[error("expression parse error at column {column}: {message}")]
    Parse { column: usize, message: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("objects live on different manifolds (`{0}` vs `{1}`)")]
    ManifoldMismatch(String, String),
    #[error("component {component} is not periodic in circle coordinate `{coord}`")]
    NotPeriodic { component: usize, coord: String },
    #[error("empty sample region")]
    EmptyRegion,
    #[error("generator `{0}` is neither projectable nor vertical; supply a projectable generating set")]
    NotProjectable(String),
    #[error("submersion has no section and is not a coordinate projection")]
    MissingSection,
    #[error("words are not composable: target {target:?} differs from source {source_point:?}")]
    NotComposable { target: Vec<f64>, source_point: Vec<f64> },
    #[error("flow left the domain at time {time} from {start:?}; shrink the radius below {suggested_radius}")]
    FlowLeftDomain { start: Vec<f64>, time: f64, suggested_radius: f64 },
    #[error("integration step failure: {0}")]
    StepFailure(String),
    #[error("rank detection failed: {0}")]
    RankDetection(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("group axiom violated: {0}")]
    Axiom(String),
    #[error("no common ball: {0}")]
    NoCommonBall(String),
    #[error("least-squares residual {residual} exceeds {tolerance}")]
    Residual { residual: f64, tolerance: f64 },
    #[error("invalid groupoid arrow: {0}")]
    InvalidArrow(String),
    #[error("scenario error at line {line}: {message}")]
    Scenario { line: usize, message: String },
    #[error("unknown check `{0}`")]
    UnknownCheck(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
