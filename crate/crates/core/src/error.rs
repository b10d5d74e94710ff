use thiserror::Error;

use crate::alignment::Block;

/// Errors raised by the geometry, alignment, map construction and extension layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid map specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("rank deficiency: pivot {pivot:e} below threshold {threshold:e}")]
    RankDeficient { pivot: f64, threshold: f64 },

    #[error("correspondence is not an isometry: pair ({i}, {j}) has source distance {source_distance} and target distance {target_distance}")]
    NotAnIsometry {
        i: usize,
        j: usize,
        source_distance: f64,
        target_distance: f64,
    },

    #[error("only an improper motion matches the correspondence")]
    OrientationInfeasible,

    #[error("motions have different orientations")]
    OrientationMismatch,

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("rotation logarithm is ambiguous (rotation angle {angle} too close to pi); {hint}")]
    AmbiguousGeodesic { angle: f64, hint: String },

    #[error("distortion too large: {0}")]
    DistortionTooLarge(String),

    #[error("delta too large: guard `{guard}` requires {value:e} <= {limit:e}")]
    DeltaTooLarge {
        guard: String,
        value: f64,
        limit: f64,
    },

    #[error("negative block detected{}", witness_suffix(.witness))]
    NegativeBlockDetected { witness: Option<Box<Block>> },

    #[error("glue precondition failed in region `{region}`: {detail}")]
    GluePrecondition { region: String, detail: String },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("at cluster path {path:?}: {source}")]
    Recursion {
        path: Vec<usize>,
        #[source]
        source: Box<Error>,
    },
}

fn witness_suffix(witness: &Option<Box<Block>>) -> String {
    match witness {
        Some(b) => format!(" at indices {:?}", b.indices),
        None => String::new(),
    }
}

impl Error {
    /// Strips any recursion wrappers and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Recursion { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn at_path(self, index: usize) -> Error {
        match self {
            Error::Recursion { mut path, source } => {
                path.insert(0, index);
                Error::Recursion { path, source }
            }
            other => Error::Recursion {
                path: vec![index],
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
