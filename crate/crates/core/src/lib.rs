//! Growth rates of time-periodic linear cooperative patch models.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod digdid;
pub mod error;
pub mod limits;
pub mod matrix;
pub mod modelfile;
pub mod monodromy;
pub mod ode;
pub mod path;
pub mod quadrature;
pub mod simplex;
pub mod sweep;

pub use error::{Error, Result};
pub use matrix::{PerronResult, SpectralResult, SquareMatrix};
pub use path::{bind, Breakpoint, ModelParameters, PatchModel, PiecewiseMatrixPath, Segment};
