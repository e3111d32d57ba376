//! Random forests grown on i.i.d. random observation weights (RF-RW) for
//! nonlinear time-series forecasting.
//!
//! Instead of bootstrap resampling, every tree sees the whole training series
//! with its own vector of nonnegative unit-mean weights, which keeps the serial
//! ordering intact while still decorrelating the trees. Bootstrap and
//! moving-block bootstrap forests are available as multiplicity weights for
//! comparison.

pub mod bench;
pub mod data;
pub mod dgp;
pub mod embed;
pub mod error;
pub mod forest;
pub mod io;
pub mod policy;
pub mod rng;
pub mod weighting;

pub use data::Dataset;
pub use error::{Error, Result};
pub use forest::{fit_forest, Forest, ForestConfig, MTry, Tree};
pub use policy::GrowthPolicy;
pub use weighting::WeightScheme;
