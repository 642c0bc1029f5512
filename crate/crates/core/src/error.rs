use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample is empty")]
    EmptySample,

    #[error("sample {index} is not a finite number")]
    NonFiniteSample { index: usize },

    #[error("weight {index} is negative or not finite")]
    InvalidWeight { index: usize },

    #[error("weights sum to zero")]
    ZeroTotalWeight,

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("partition cell `{cell}` has no rows")]
    EmptyCell { cell: String },

    #[error("partition cell `{cell}` has no rows with G={class}")]
    MissingClass { cell: String, class: u8 },

    #[error("partition cell `{cell}` needs response labels but none were supplied")]
    LabelsRequired { cell: String },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("predictor index {index} out of range for {len} predictors")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unknown predictor `{0}`")]
    UnknownPredictor(String),

    #[error("exact enumeration supports at most {max} predictors, got {n}")]
    TooManyPredictors { n: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("response has a single class; at least one 0 and one 1 are required")]
    DegenerateLabels,

    #[error("labels must be 0 or 1, found {0}")]
    NonBinaryLabel(f64),

    #[error("calibration failed: {0}")]
    CalibrationFailure(String),

    #[error("unknown synthetic model `{0}` (expected M1, M2, M3 or M4)")]
    UnknownModel(String),

    #[error("search space is empty: {0}")]
    EmptySearchSpace(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than from the
    /// caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::CalibrationFailure(_) | Error::Numerical(_))
    }
}
