//! Wasserstein-based model bias measurement, bias explanations and
//! post-processing mitigation for binary classifiers.
//!
//! The crate is organised bottom-up:
//!
//! * [`empirical`]: step CDFs, quantiles, exact 1D transport and KS distance.
//! * [`bias`]: partition-weighted model, classifier and quantile bias.
//! * [`explain`]: PDP, marginal Shapley and ICE explainers.
//! * [`attribution`]: bias explanations, Shapley bias games and predictor selection.
//! * [`transform`]: compressive predictor transforms and post-processed models.
//! * [`calibrate`]: isotonic and link-space recalibration, AUC.
//! * [`learn`]: synthetic data generators, gradient boosting, logistic regression.
//! * [`mitigate`]: bias/loss frontier search with Bayesian optimisation.

// `!(x > 0.0)` style checks reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod bias;
pub mod calibrate;
pub mod data;
pub mod empirical;
pub mod error;
pub mod explain;
pub mod learn;
pub mod mitigate;
pub mod model;
pub mod shapley;
pub mod transform;

pub use data::Dataset;
pub use empirical::{EmpiricalDistribution, Favorable, SignedTransport};
pub use error::{Error, Result};
pub use model::Model;
