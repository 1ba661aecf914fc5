use thiserror::Error;

pub type Result<T> = std::result::Result<T, SrbError>;

/// Every failure mode of the laboratory. The variant name doubles as the
/// machine-readable error name written into run manifests.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SrbError {
    #[error("point {point:?} lies on the singularity set of {system}")]
    SingularInput {
        system: &'static str,
        point: Vec<f64>,
    },

    #[error(
        "point {point:?} lies on a branch boundary of {system}; the derivative is undefined there"
    )]
    BoundaryInput {
        system: &'static str,
        point: Vec<f64>,
    },

    #[error("{0} has no singularity set")]
    NotSingularSystem(&'static str),

    #[error("parameter {field} = {value} out of range for {system}: {reason}")]
    ParameterOutOfRange {
        system: &'static str,
        field: &'static str,
        value: f64,
        reason: String,
    },

    #[error("orbit halted after {steps} of {requested} steps ({reason})")]
    OrbitHalted {
        steps: usize,
        requested: usize,
        reason: String,
    },

    #[error("no dominant direction: residual {residual:.3e} stagnated above tolerance")]
    NoDominantDirection { residual: f64 },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("degenerate ensemble: {halted} of {ensemble} orbits halted within {within} steps")]
    DegenerateEnsemble {
        halted: usize,
        ensemble: usize,
        within: usize,
    },

    #[error("invalid leaf: {0}")]
    InvalidLeaf(String),

    #[error("histogram grids differ")]
    GridMismatch,

    #[error("sample size is zero")]
    EmptySample,

    #[error("leaf construction failed: {0}")]
    LeafConstructionFailed(String),

    #[error("backward history has {available} steps, {requested} requested")]
    HistoryTooShort { available: usize, requested: usize },

    #[error("backward chains do not contract (measured rate {rate:.4})")]
    NoContraction { rate: f64 },

    #[error("band holds {fraction:.4} of the mass, below the required {required:.4}")]
    InsufficientMass { fraction: f64, required: f64 },

    #[error("inverse branch unavailable for {0}")]
    InverseUnavailable(&'static str),

    #[error("all {cells} mass estimates are zero; no power law can be fitted")]
    AllMassZero { cells: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl SrbError {
    /// Stable identifier of the variant, used in manifests and diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            SrbError::SingularInput { .. } => "SingularInput",
            SrbError::BoundaryInput { .. } => "BoundaryInput",
            SrbError::NotSingularSystem(_) => "NotSingularSystem",
            SrbError::ParameterOutOfRange { .. } => "ParameterOutOfRange",
            SrbError::OrbitHalted { .. } => "OrbitHalted",
            SrbError::NoDominantDirection { .. } => "NoDominantDirection",
            SrbError::ZeroVector => "ZeroVector",
            SrbError::EmptyEnsemble => "EmptyEnsemble",
            SrbError::DegenerateEnsemble { .. } => "DegenerateEnsemble",
            SrbError::InvalidLeaf(_) => "InvalidLeaf",
            SrbError::GridMismatch => "GridMismatch",
            SrbError::EmptySample => "EmptySample",
            SrbError::LeafConstructionFailed(_) => "LeafConstructionFailed",
            SrbError::HistoryTooShort { .. } => "HistoryTooShort",
            SrbError::NoContraction { .. } => "NoContraction",
            SrbError::InsufficientMass { .. } => "InsufficientMass",
            SrbError::InverseUnavailable(_) => "InverseUnavailable",
            SrbError::AllMassZero { .. } => "AllMassZero",
            SrbError::InvalidArgument(_) => "InvalidArgument",
            SrbError::Parse(_) => "Parse",
            SrbError::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for SrbError {
    fn from(e: std::io::Error) -> Self {
        SrbError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for SrbError {
    fn from(e: serde_json::Error) -> Self {
        SrbError::Parse(e.to_string())
    }
}
