use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("evaluation set is empty (no pixel passes mask, validity and range cap)")]
    EmptyEvaluationSet,

    #[error("ground truth is zero at evaluated pixel ({x}, {y}); relative error undefined")]
    ZeroDepth { x: usize, y: usize },

    #[error("negative depth {value} at pixel ({x}, {y})")]
    NegativeDepth { x: usize, y: usize, value: f64 },

    #[error("requested {requested} samples/segments but the image has only {pixels} pixels")]
    BudgetExceedsPixels { requested: usize, pixels: usize },

    #[error("segment {0} has no sample")]
    SegmentWithoutSample(usize),

    #[error("segment {0} has more than one sample")]
    MultipleSamplesInSegment(usize),

    #[error("least-squares system is rank deficient (points collinear or too few)")]
    RankDeficient,

    #[error("at least 3 non-collinear samples are required, got {0} usable")]
    DegenerateSamples(usize),

    #[error("radius {radius} exceeds the chart radius {max}")]
    RadiusOutOfRange { radius: f64, max: f64 },

    #[error("empty conditioning set: {0}")]
    EmptyConditioningSet(&'static str),

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
