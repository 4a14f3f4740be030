//! Distributionally robust output-feedback control for linear plants whose
//! outputs are privatized with Gaussian or Laplace noise.
//!
//! The crate is `no_std` (it needs `alloc`) and covers the whole numerical
//! pipeline:
//! - [`privacy`]: calibration of the Gaussian and Laplace mechanisms and noise sampling.
//! - [`ambiguity`]: KL divergences from the nominal Gaussian and the radius of the
//!   KL ball containing every admissible noise distribution.
//! - [`riccati`]: the coupled forward/backward risk-sensitive Riccati recursions and
//!   the closed-form optimal value `W_tau`.
//! - [`synthesis`]: the outer search over `tau`, the robust controller and the LQG baseline.
//! - [`simulate`]: seeded Monte-Carlo closed-loop evaluation.
//!
//! All logarithms are natural logarithms.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod ambiguity;
pub mod linalg;
pub mod model;
pub mod privacy;
pub mod riccati;
pub mod simulate;
pub mod synthesis;

mod error;

pub use error::{Error, Result, Violation};

/// Dense column-major matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense column vector.
pub type Vector = nalgebra::DVector<f64>;
