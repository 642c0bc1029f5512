//! The scoring-model abstraction shared by explainers, transforms and search.

use rayon::prelude::*;

use crate::data::Dataset;

/// A real-valued model of the predictors.
///
/// Any `Fn(&[f64]) -> f64 + Sync` is a model, which keeps test fixtures short.
pub trait Model: Sync {
    fn predict_row(&self, x: &[f64]) -> f64;

    /// Scores every row of a row-major matrix with `n_features` columns.
    fn predict_matrix(&self, x: &[f64], n_features: usize) -> Vec<f64> {
        x.par_chunks_exact(n_features)
            .map(|r| self.predict_row(r))
            .collect()
    }

    fn predict(&self, data: &Dataset) -> Vec<f64> {
        self.predict_matrix(data.x(), data.n_features())
    }
}

impl<F> Model for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn predict_row(&self, x: &[f64]) -> f64 {
        self(x)
    }
}
