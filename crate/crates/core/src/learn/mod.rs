//! Synthetic data, model training and loss metrics.

pub mod gbm;
pub mod logistic;
pub mod metrics;
pub mod synthetic;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::empirical::Favorable;
use crate::error::Result;
use crate::model::Model;

pub use gbm::{train_gbm, GbmConfig, GbmModel};
pub use logistic::{train_logistic, LogisticModel};
pub use metrics::log_loss;
pub use synthetic::{generate, SyntheticModel, SyntheticSpec};

/// The fitted model behind a [`TrainedModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelBody {
    Gbm(GbmModel),
    Logistic(LogisticModel),
}

/// A probability model of `Y` given the predictors, trained without `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub favorable: Favorable,
    pub body: ModelBody,
}

impl TrainedModel {
    pub fn n_features(&self) -> usize {
        match &self.body {
            ModelBody::Gbm(m) => m.n_features,
            ModelBody::Logistic(m) => m.coefficients.len(),
        }
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

impl Model for TrainedModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        match &self.body {
            ModelBody::Gbm(m) => m.predict_row(x),
            ModelBody::Logistic(m) => m.predict_row(x),
        }
    }
}
