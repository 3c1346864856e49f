use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} outside [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("undefined bearing: points coincide")]
    UndefinedBearing,
    #[error("interpolation fraction {0} outside [0, 1]")]
    FractionOutOfRange(f64),

    #[error("expected header `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("non-positive braking denominator (friction + grade = {0})")]
    NonPositiveBraking(f64),
    #[error("invalid speed {0} km/h")]
    InvalidSpeed(f64),
    #[error("invalid advisory config: {0}")]
    InvalidConfig(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("degenerate trace: {0}")]
    DegenerateTrace(String),
    #[error("arc position {arc} m outside trace [0, {total}] m")]
    ArcOutOfRange { arc: f64, total: f64 },

    #[error("clip mismatch: timeline is `{timeline}`, ground truth is `{window}`")]
    ClipMismatch { timeline: String, window: String },
    #[error("invalid ground truth: {0}")]
    InvalidGroundTruth(String),
    #[error("invalid sampling distances: {0}")]
    InvalidSweep(String),

    #[error("unsupported map schema version {0}")]
    SchemaVersion(u32),
    #[error("invalid map file: {0}")]
    InvalidMap(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
