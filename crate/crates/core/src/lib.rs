//! Matrix completion under general norm regularization.
//!
//! The crate is split the same way the experiment pipeline is:
//! [`model`] holds matrices, sampling and noise, [`norms`] the regularizers,
//! [`solvers`] the estimators, [`geometry`] the Monte Carlo cone
//! complexity estimators and [`harness`] the sweep runner behind the `smc`
//! binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod model;
pub mod norms;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use model::{DenseMatrix, NoiseKind, NoiseModel, ObservationSet, ObservationVector};
pub use norms::NormSpec;
