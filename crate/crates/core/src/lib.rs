//! Covariance and precision matrix estimation for approximate factor models.
//!
//! The estimators in this crate follow the POET (Principal Orthogonal
//! complEment Thresholding) recipe: take a pilot estimate of the covariance
//! matrix together with its leading eigenvalues and eigenvectors, subtract
//! the leading low-rank component, threshold the residual entrywise, and add
//! the low-rank part back. Two interchangeable pilot families are provided:
//!
//! * [`pilot::pilot_subgaussian`] — the sample covariance matrix and its
//!   eigen-structure, appropriate for light-tailed data;
//! * [`pilot::pilot_elliptical`] — a rank-based pilot for heavy-tailed
//!   elliptical data, combining robust marginal variances, the marginal
//!   Kendall's tau correlation matrix, and the multivariate Kendall's tau
//!   statistic for eigenvectors.
//!
//! On top of the covariance pipeline, [`clime`] estimates the sparse
//! precision matrix of the idiosyncratic component by column-wise
//! l1-minimization and recomposes the full precision matrix through the
//! Sherman-Morrison-Woodbury identity. The [`sim`] module generates
//! multivariate-t factor data and benchmarks both pilot families over
//! seeded Monte Carlo replications.

pub mod clime;
pub mod data;
pub mod error;
pub mod io;
pub mod kendall;
pub mod linalg;
pub mod pilot;
pub mod poet;
pub mod robust;
pub mod sim;

mod simplex;

pub use data::DataMatrix;
pub use error::{DataError, EstimateError, LinalgError};
pub use kendall::{MultiKendall, PairMode, TauMatrix};
pub use linalg::{EigenPairs, SymMatrix};
pub use pilot::{PilotFamily, PilotTriple};
pub use poet::{FamilySpec, PoetResult, PsdMode, Shrinkage, ThresholdRule};
pub use clime::PrecisionEstimate;
pub use robust::{MEstimatorConfig, MFamily, RobustScale};
pub use sim::{Design, ErrorReport, ExperimentConfig, Metric, NRule};
