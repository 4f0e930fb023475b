use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported datatype code {0}")]
    UnsupportedDatatype(i32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("non-finite voxel value at linear index {0}")]
    NonFiniteVoxel(usize),
    #[error("voxel count {found} does not match geometry ({expected} voxels)")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("value {0} is not representable in the target datatype")]
    ValueNotRepresentable(f64),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("SUV parameters must be strictly positive")]
    NonPositiveParams,
    #[error("negative activity concentration at linear index {0}")]
    NegativeActivity(usize),
    #[error("region out of bounds: {0}")]
    RegionOutOfBounds(String),
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("reference mask is empty")]
    EmptyReference,
    #[error("both masks are empty")]
    BothEmpty,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no lesions or components in the pooled population")]
    EmptyPopulation,
    #[error("at least {required} lesions required, found {found}")]
    InsufficientPopulation { required: usize, found: usize },
    #[error("intensity volumes are required for SUVmax stratification")]
    MissingIntensity,
    #[error("subset {0} has no cases")]
    EmptySubset(String),
    #[error("at least two algorithms are required, found {0}")]
    InsufficientAlgorithms(usize),
    #[error("too few non-zero paired differences ({found}, need {required})")]
    TooFewPairs { required: usize, found: usize },
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("at least two masks are required for voting, found {0}")]
    TooFewMasks(usize),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("duplicate case id {0}")]
    DuplicateCase(String),
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("lesion placement failed after {0} attempts")]
    PlacementFailure(usize),
    #[error("no case could be evaluated")]
    NoSuccessfulCases,
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
