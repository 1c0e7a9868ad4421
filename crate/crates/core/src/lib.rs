//! Parameter estimation for river tracer breakthrough curves against a
//! reusable dimensionless synthetic ensemble.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coarse;
mod container;
pub mod curve;
pub mod dataset;
pub mod dehoog;
pub mod embedding;
pub mod error;
pub mod forward;
pub mod kernel;
pub mod kl;
pub mod laplace;
pub mod lipo;
pub mod metrics;
pub mod pbi;
pub mod pipeline;
pub mod prior;
pub mod quadrature;
pub mod refine;
pub mod result;

pub use error::{Error, Result};
