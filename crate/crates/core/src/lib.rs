//! Adaptive estimation in the linear model linking a functional covariate to
//! a functional response, Y = S X + noise, on the L2([0, 1]) midpoint grid.
//!
//! The crate provides, in layers:
//!
//! - [`grid`]: discretized function algebra (inner products, norms, centering);
//! - [`cov`]: empirical covariance and cross-covariance operators, functional
//!   PCA and the truncated pseudo-inverse;
//! - [`estimator`]: the double-truncation least-squares estimator on the PCA
//!   basis and the generic-basis solver, prediction and kernel evaluation;
//! - [`selection`]: penalized-contrast choice of the input dimension, with a
//!   known noise variance or a fully data-driven plug-in;
//! - [`simulate`]: the simulation models, Monte Carlo prediction-error studies
//!   and the penalty calibration sweep;
//! - [`dataio`]: CSV ingestion, day-splitting of time series into curves,
//!   outlier filtering and leave-one-out cross-validation;
//! - [`model_io`]: JSON serialization of fitted models.
//!
//! # Example
//!
//! ```
//! use fofr::selection::{select_m1, SelectionConfig, SigmaMode};
//! use fofr::simulate::{generate, ModelSpec, RngStream};
//! use fofr::Grid;
//!
//! let grid = Grid::new(50);
//! let spec = ModelSpec::model_i();
//! let data = generate(&spec, 80, &grid, &mut RngStream::new(1, 0));
//! let xs = data.xs.center();
//! let ys = data.ys.center();
//! let config = SelectionConfig {
//!     kappa: 0.6,
//!     sigma: SigmaMode::Plugin,
//!     max_dim_cap: None,
//! };
//! let (result, model) = select_m1(&xs, &ys, &config)?;
//! assert!(result.m1_hat >= 1);
//! let prediction = model.predict(data.xs.function(0), true)?;
//! assert_eq!(prediction.grid().p(), 50);
//! # Ok::<(), fofr::Error>(())
//! ```

pub mod cov;
pub mod dataio;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod model_io;
pub mod selection;
pub mod simulate;
pub mod stats;

pub use cov::{empirical_covariance, empirical_cross_covariance, pca, GridOperator, PcaBasis};
pub use error::{Error, Result};
pub use estimator::{
    contrast, empirical_norm_sq, fit_basis, fit_pca, BasisSpec, FittedModel, Operator, OutputDim,
};
pub use grid::{FunctionalSample, Grid, GridFunction};
pub use selection::{
    candidate_set, penalty, select_m1, SelectionConfig, SelectionResult, SigmaMode,
};
