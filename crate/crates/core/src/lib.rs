//! Clustered Gaussian graphical models.
//!
//! Estimates a precision matrix whose rows and columns fuse into symmetric
//! checkerboard blocks under a convex pairwise fusion penalty, and reads
//! variable clusters off the fused solution.

pub mod admm;
pub mod error;
pub mod fusion;
pub mod matrix;

pub use error::{CggmError, Result};
pub use matrix::SymMatrix;
pub mod baselines;
pub mod cluster;
pub mod preprocess;
pub mod synthetic;
