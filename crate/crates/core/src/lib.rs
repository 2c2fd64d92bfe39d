//! Learning quantities of interest (QoI) from ensembles of time series and
//! solving the observation-consistent stochastic inverse problem on them.
//!
//! The pipeline is:
//!
//! 1. [`splinefilter`]: approximate every raw series by an adaptively knotted
//!    piecewise-linear spline and resample it on a coarse uniform grid.
//! 2. [`clustering`] + [`svm`]: label the filtered predictions with k-means,
//!    train kernel SVMs on those labels and classify the observations.
//! 3. [`kpca`]: per cluster, standardize and run kernel PCA; the leading
//!    components are the learned QoI.
//! 4. [`density`]: KDEs on the QoI samples give per-cluster density ratios,
//!    which reweight the initial parameter samples into the updated density.
//!
//! [`models`] contains the forward models used to produce ensembles.

pub mod clustering;
pub mod density;
pub mod error;
pub mod kernel;
pub mod kpca;
mod linalg;
pub mod models;
pub mod rng;
pub mod splinefilter;
pub mod store;
pub mod svm;
pub mod timeseries;

pub use error::{Error, Result};
