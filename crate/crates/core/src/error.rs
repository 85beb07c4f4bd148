use thiserror::Error;

use crate::matrix::SquareMatrix;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver did not converge on {n}x{n} matrix {matrix:?}", n = matrix.n())]
    EigenSolver { matrix: SquareMatrix },

    #[error("perron_root requires irreducible nonnegative matrix")]
    NotIrreducibleNonnegative,

    #[error("matrix exponential overflow (t*|M| = {0:.3e}); rescale the model or shorten the period")]
    Overflow(f64),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("average migration matrix reducible; growth rate may be patch-dependent")]
    Reducible,

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("periodicity violated; integrator tolerance insufficient (drift {0:.3e})")]
    Periodicity(f64),

    #[error("crossing cap exceeded in segment {segment}: more than {cap} crossings (rapid oscillations are not supported)")]
    CrossingCap { segment: usize, cap: usize },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("domain predicate violated: {0}")]
    Domain(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),

    #[error("model file: {0}")]
    ModelFile(String),
}
