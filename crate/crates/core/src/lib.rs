//! Sparse high-dimensional linear regression toolkit.
//!
//! The crate covers the model `Y = Xβ* + W` with Gaussian design and noise:
//! instance generation, LASSO (optionally box constrained) by cyclic coordinate
//! descent, a best-single-swap local search over `k`-sparse supports, and a set
//! of exhaustive diagnostics of the support landscape (overlap profiles, overlap
//! gap verdicts, non-trivial local minima, deviating-local-minimum triplets,
//! restricted isometry constants). The [`experiments`] module sweeps sample
//! sizes and writes reproducible CSV tables.

pub mod combinatorics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod landscape;
pub mod lasso;
pub mod linalg;
pub mod lsa;
pub mod model;
pub mod rip;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{Dimensions, Instance, RecoveryReport, SparseVector};

/// Version tag carried by every JSON report.
pub const SCHEMA_VERSION: u32 = 1;
