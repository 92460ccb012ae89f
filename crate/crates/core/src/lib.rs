#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod densemat;
pub mod error;
pub mod normest;
pub mod oracle;
pub mod pade;
pub mod phieval;
pub mod scalar;
pub mod select;

pub use densemat::DenseMatrix;
pub use error::{PhiError, Result};
pub use scalar::{Scalar, ScalarKind};
