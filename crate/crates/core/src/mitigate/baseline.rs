//! Comparison search that retrains the boosted model over a box of
//! hyperparameters instead of post-processing a fixed model.

use serde::{Deserialize, Serialize};

use crate::bias::{PartitionIndex, PartitionSpec};
use crate::empirical::Favorable;
use crate::error::Result;
use crate::learn::gbm::{train_gbm, GbmConfig};
use crate::learn::metrics::log_loss;
use crate::model::Model;

use super::family::Splits;
use super::{search, Family, Frontier, Metrics, ParamBound, PointEval, SearchSpace};

/// Box over `(n_estimators, max_leaves, max_depth, learning_rate)`. Integer
/// coordinates are rounded to the nearest integer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmBounds {
    pub n_estimators: (usize, usize),
    pub max_leaves: (usize, usize),
    pub max_depth: (usize, usize),
    pub learning_rate: (f64, f64),
}

impl Default for GbmBounds {
    fn default() -> Self {
        Self { n_estimators: (40, 250), max_leaves: (4, 20), max_depth: (2, 20), learning_rate: (0.05, 0.5) }
    }
}

impl GbmBounds {
    pub fn params(&self) -> Vec<ParamBound> {
        let int = |name: &str, (lo, hi): (usize, usize)| ParamBound::new(name, lo as f64, hi as f64);
        vec![
            int("n_estimators", self.n_estimators),
            int("max_leaves", self.max_leaves),
            int("max_depth", self.max_depth),
            ParamBound::new("learning_rate", self.learning_rate.0, self.learning_rate.1),
        ]
    }

    /// The configuration at `gamma`; fields outside the box come from `base`.
    pub fn config(&self, gamma: &[f64], base: &GbmConfig) -> GbmConfig {
        GbmConfig {
            n_estimators: gamma[0].round() as usize,
            max_leaves: gamma[1].round() as usize,
            max_depth: gamma[2].round() as usize,
            learning_rate: gamma[3],
            ..*base
        }
    }

    /// Rounds the integer coordinates so equal configurations share a key.
    fn canonical(gamma: &[f64]) -> Vec<f64> {
        vec![gamma[0].round(), gamma[1].round(), gamma[2].round(), gamma[3]]
    }
}

pub struct GbmFamily<'a> {
    splits: Splits<'a>,
    bounds: GbmBounds,
    params: Vec<ParamBound>,
    base: GbmConfig,
    favorable: Favorable,
    holdout_index: PartitionIndex,
    test_index: PartitionIndex,
}

impl<'a> GbmFamily<'a> {
    pub fn new(
        splits: Splits<'a>,
        bounds: GbmBounds,
        base: GbmConfig,
        partition: &PartitionSpec,
        favorable: Favorable,
    ) -> Result<Self> {
        let index = |d: &crate::data::Dataset| PartitionIndex::new(d.g(), partition.needs_labels().then(|| d.y()), partition);
        Ok(Self {
            holdout_index: index(splits.holdout)?,
            test_index: index(splits.test)?,
            splits,
            params: bounds.params(),
            bounds,
            base,
            favorable,
        })
    }
}

impl Family for GbmFamily<'_> {
    fn bounds(&self) -> &[ParamBound] {
        &self.params
    }

    fn evaluate(&self, gamma: &[f64]) -> Result<PointEval> {
        let cfg = self.bounds.config(&GbmBounds::canonical(gamma), &self.base);
        let model = train_gbm(self.splits.train, &cfg)?;
        let metrics = |d: &crate::data::Dataset, idx: &PartitionIndex| -> Result<Metrics> {
            let s = model.predict(d);
            Ok(Metrics { loss: log_loss(d.y(), &s), bias: idx.transport(&s, self.favorable)?.total })
        };
        Ok(PointEval {
            holdout: metrics(self.splits.holdout, &self.holdout_index)?,
            test: metrics(self.splits.test, &self.test_index)?,
            calibrated: false,
            warnings: Vec::new(),
        })
    }

    fn describe(&self, gamma: &[f64]) -> serde_json::Value {
        serde_json::to_value(self.bounds.config(&GbmBounds::canonical(gamma), &self.base))
            .unwrap_or(serde_json::Value::Null)
    }
}

/// Frontier of retrained boosted models over the hyperparameter box.
///
/// Integer coordinates are snapped before the search sees them, so nearby
/// proposals that round to the same configuration share one evaluation.
pub fn run_hyperparam_baseline(
    splits: Splits<'_>,
    bounds: GbmBounds,
    base: GbmConfig,
    partition: &PartitionSpec,
    favorable: Favorable,
    space: &SearchSpace,
) -> Result<Frontier> {
    let family = Snapped(GbmFamily::new(splits, bounds, base, partition, favorable)?);
    let mut frontier = search(&family, space)?;
    for p in &mut frontier.points {
        p.params = GbmBounds::canonical(&p.params);
    }
    Ok(frontier)
}

/// The configuration of the best holdout model at `omega = 0`, the model
/// handed on to post-processing.
pub fn best_unpenalised_config(frontier: &Frontier, bounds: &GbmBounds, base: &GbmConfig) -> Option<GbmConfig> {
    frontier.best_for_omega(0.0).map(|p| bounds.config(&p.params, base))
}

struct Snapped<'a>(GbmFamily<'a>);

impl Family for Snapped<'_> {
    fn bounds(&self) -> &[ParamBound] {
        self.0.bounds()
    }

    fn evaluate(&self, gamma: &[f64]) -> Result<PointEval> {
        self.0.evaluate(&GbmBounds::canonical(gamma))
    }

    fn describe(&self, gamma: &[f64]) -> serde_json::Value {
        self.0.describe(gamma)
    }
}
