use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("series contains a non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("series too short: need at least {required} samples, got {actual}")]
    TooShort { required: usize, actual: usize },
    #[error("window {window} exceeds series length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("only {0} usable scales, need at least 4")]
    DegenerateScaleRange(usize),
    #[error("singularity spectrum has too few points")]
    EmptySpectrum,
    #[error("autocovariance matrix is singular")]
    SingularToeplitz,
    #[error("every feature column was dropped by the variance filter")]
    AllColumnsDropped,
    #[error("no trained models supplied")]
    NoModels,
    #[error("user {user} has {count} recordings, need at least 2")]
    InsufficientRecordings { user: String, count: usize },
    #[error("training data is empty")]
    EmptyData,
    #[error("class {class} has {count} samples, fewer than {folds} folds")]
    ClassTooSmall { class: usize, count: usize, folds: usize },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("pooled covariance matrix is singular")]
    SingularCovariance,
    #[error("insufficient samples: n_a + n_b - 2 = {df} must exceed dimension {dim}")]
    InsufficientSamples { df: usize, dim: usize },
    #[error("user {0} is already enrolled")]
    DuplicateUser(String),
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("test data is empty")]
    EmptyTestData,
    #[error("model library is empty")]
    EmptyLibrary,
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("fusion weights must lie in [0, 1] and sum to 1: {0:?}")]
    BadWeights(Vec<f64>),
    #[error("length {0} is not a power of two of at least 2^10")]
    BadLength(usize),
    #[error("Hurst exponent {0} outside (0, 1)")]
    BadHurst(f64),
    #[error("library format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt library file: {0}")]
    CorruptFile(String),
    #[error("feature {0} is missing from the matrix")]
    MissingFeature(String),
    #[error("malformed input {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroVariance => "ZeroVariance",
            Error::NonFinite(_) => "NonFinite",
            Error::TooShort { .. } => "TooShort",
            Error::WindowTooLarge { .. } => "WindowTooLarge",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::DegenerateScaleRange(_) => "DegenerateScaleRange",
            Error::EmptySpectrum => "EmptySpectrum",
            Error::SingularToeplitz => "SingularToeplitz",
            Error::AllColumnsDropped => "AllColumnsDropped",
            Error::NoModels => "NoModels",
            Error::InsufficientRecordings { .. } => "InsufficientRecordings",
            Error::EmptyData => "EmptyData",
            Error::ClassTooSmall { .. } => "ClassTooSmall",
            Error::EmptyGrid => "EmptyGrid",
            Error::SingularCovariance => "SingularCovariance",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::DuplicateUser(_) => "DuplicateUser",
            Error::UnknownUser(_) => "UnknownUser",
            Error::EmptyTestData => "EmptyTestData",
            Error::EmptyLibrary => "EmptyLibrary",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::BadWeights(_) => "BadWeights",
            Error::BadLength(_) => "BadLength",
            Error::BadHurst(_) => "BadHurst",
            Error::VersionMismatch { .. } => "VersionMismatch",
            Error::CorruptFile(_) => "CorruptFile",
            Error::MissingFeature(_) => "MissingFeature",
            Error::Parse { .. } => "Parse",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
