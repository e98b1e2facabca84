//! Rank-adaptive estimation of matrices from linear measurements.
//!
//! The crate covers two data models, multivariate regression
//! `Y = X Aᵀ + E` and linear system identification `x_{t+1} = A x_t + η_t`,
//! and provides:
//!
//! * [`spectral`]: SVD, rank truncation, hard thresholding, eigenvalue
//!   statistics and controllability Gramians;
//! * [`problem`]: seeded synthetic targets, designs and trajectories;
//! * [`estimators`]: LSE, R-LSE, T-LSE, nuclear-norm and RSC estimators;
//! * [`bounds`]: closed-form upper bounds, rates and sample-complexity
//!   lower bounds.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod problem;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::DenseMatrix;
