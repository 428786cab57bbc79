//! Non-uniform power delivery network synthesis.
//!
//! Starting from a uniform stripe pattern, stripes are removed inside
//! routing-congested windows whose IR drop leaves room to spare, then the
//! whole chip is re-verified for IR drop and electromigration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod congestion;
pub mod design;
pub mod error;
pub mod geom;
pub mod ir;
pub mod linalg;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod synthesis;
pub mod windowing;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Csr = linalg::CsrMatrix<f64>;
pub type Csr32 = linalg::CsrMatrix<f32>;
pub type System = ir::ConductanceSystem<f64>;
pub type System32 = ir::ConductanceSystem<f32>;
pub type Solution = ir::IrSolution<f64>;
pub type Solution32 = ir::IrSolution<f32>;
