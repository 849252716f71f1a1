//! Estimation of sparse vectors, low-rank matrices and low-Tucker-rank
//! tensors from nonlinear observations.
//!
//! The three solver families are projected gradient descent ([`solvers::pgd`]),
//! Riemannian gradient descent on the fixed-Tucker-rank manifold
//! ([`solvers::rgd`]) and factorized gradient descent with rebalancing
//! ([`solvers::fgd`]). Each consumes a [`models::GradientOracle`] built from a
//! dataset and an observation model.

pub mod cone;
pub mod error;
pub mod harness;
pub mod init;
pub mod linalg;
pub mod models;
pub mod quadrature;
pub mod random;
pub mod solvers;
pub mod tensor;

pub use error::{Error, Result};
pub use linalg::Mat;
pub use tensor::{Tensor3, TuckerPoint};
