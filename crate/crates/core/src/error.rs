use thiserror::Error;

/// Errors raised by the moment engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ground size {0}")]
    InvalidGroundSize(usize),

    #[error("ground set of size {size} exceeds the enumeration cap of {cap}")]
    GroundSetCap { size: usize, cap: usize },

    #[error("interval pattern covers {pattern} points but the ground set has {ground}")]
    PatternMismatch { pattern: usize, ground: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("block profile must be non-empty with sizes >= 1")]
    InvalidProfile,

    #[error("law provides cumulants up to order {available}, order {needed} required")]
    MissingCumulant { needed: usize, available: usize },

    #[error("completion of rho_{h} is not unique: found {found} candidates")]
    CompletionNotUnique { h: usize, found: usize },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel has no off-diagonal mass and cannot be normalized")]
    ZeroKernel,

    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid slice: fixing {fixed} indices of a degree-{degree} kernel")]
    InvalidSlice { fixed: usize, degree: usize },

    #[error("overlap size {s} out of range 1..={max}")]
    OverlapOutOfRange { s: usize, max: usize },

    #[error("family {family} requires {requirement}")]
    FamilyRange { family: String, requirement: String },

    #[error("assumption {assumption} violated: {detail}")]
    Assumption { assumption: &'static str, detail: String },

    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("invalid sampler: {0}")]
    InvalidSampler(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("contraction table of {entries} entries exceeds the working cap")]
    TooLarge { entries: u128 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
