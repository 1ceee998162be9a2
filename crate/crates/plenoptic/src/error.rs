use thiserror::Error;

/// Failures raised by the pipeline stages.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("pitch must be odd (got {0})")]
    EvenPitch(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no dominant blob scale: scale-space response peaks at a pyramid boundary (level {level} of {levels})")]
    NoDominantScale { level: usize, levels: usize },

    #[error("no centroids found")]
    NoCentroids,

    #[error("ambiguous packing vote: {hexagonal} hexagonal vs {rectangular} rectangular")]
    AmbiguousPacking { hexagonal: usize, rectangular: usize },

    #[error("inconsistent lattice: {0}")]
    InconsistentLattice(String),

    #[error("grid fit diverged after {iterations} iterations (cost {cost:.6e})")]
    Divergence { iterations: usize, cost: f64, params: [f64; 9] },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("focus scale {requested} is not representable with refine factor {refine}; nearest is {nearest}")]
    NotRepresentable { requested: f64, refine: usize, nearest: f64 },

    #[error("non-finite values: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
