//! CLAR: robust subspace clustering with a log-determinant rank surrogate.
//!
//! The pipeline solves
//! `min logdet(I + ZᵀZ) + λ‖E‖_l  s.t.  X = XZ + E`
//! by augmented Lagrangian alternating minimization, turns the coefficient
//! matrix into an angular affinity graph, segments it with normalized-cuts
//! spectral clustering, and scores the result against ground truth.
//!
//! Data orientation: X is m×n with columns as samples.

pub mod affinity;
pub mod data;
pub mod error;
pub mod error_prox;
pub mod eval;
pub mod kernels;
pub mod logdet;
pub mod manifest;
pub mod pipeline;
pub mod solver;
pub mod spectral;

pub use error::{ClarError, Result};
pub use kernels::Matrix;
