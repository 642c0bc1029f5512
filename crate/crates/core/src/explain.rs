//! Single-predictor explainers built on the marginal game
//! `v(S; r) = mean_b f(r_S, b_{-S})` over a background sample.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::shapley::{exact_shapley, sampled_shapley};

/// Largest predictor count for exact Shapley enumeration.
pub const MAX_EXACT_PREDICTORS: usize = 12;
/// Default background size.
pub const DEFAULT_BACKGROUND_ROWS: usize = 500;
/// Seed of the default background subsample.
pub const DEFAULT_BACKGROUND_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainerKind {
    Pdp,
    MarginalShapley,
    Ice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ShapleyMode {
    Exact,
    /// Antithetic permutation sampling with `n_permutations` orderings
    /// (rounded up to an even number).
    Sampled { n_permutations: usize, seed: u64 },
}

/// Explanations of every predictor for every row (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct ExplainerOutput {
    pub values: Vec<f64>,
    pub n_rows: usize,
    pub n_predictors: usize,
    pub kind: ExplainerKind,
    pub background_size: usize,
    /// Mean model output over the background.
    pub base_value: f64,
    /// Set when the values are Monte Carlo estimates.
    pub approximate: bool,
}

impl ExplainerOutput {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.n_predictors..(r + 1) * self.n_predictors]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.values.chunks_exact(self.n_predictors).map(|r| r[i]).collect()
    }
}

/// Fixed-seed subsample of at most 500 rows.
pub fn default_background(data: &Dataset) -> Dataset {
    data.sample_rows(DEFAULT_BACKGROUND_ROWS, DEFAULT_BACKGROUND_SEED)
}

fn check_background(data: &Dataset, background: &Dataset) -> Result<()> {
    if background.n_rows() == 0 {
        return Err(Error::EmptySample);
    }
    if background.n_features() != data.n_features() {
        return Err(Error::LengthMismatch {
            what: "background predictors",
            expected: data.n_features(),
            found: background.n_features(),
        });
    }
    Ok(())
}

/// `v(S; r)`: mean over the background of the model with coordinates in
/// `mask` taken from `row`.
pub fn marginal_value<M: Model + ?Sized>(model: &M, row: &[f64], background: &Dataset, mask: u64) -> f64 {
    let mut z = vec![0.0; row.len()];
    let mut acc = 0.0;
    for b in background.rows() {
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = if mask >> j & 1 == 1 { row[j] } else { b[j] };
        }
        acc += model.predict_row(&z);
    }
    acc / background.n_rows() as f64
}

/// Values of the marginal game on every coalition for `row`, indexed by mask.
pub fn marginal_game_table<M: Model + ?Sized>(model: &M, row: &[f64], background: &Dataset) -> Vec<f64> {
    let n = row.len();
    let mut table = vec![0.0; 1 << n];
    let mut z = vec![0.0; n];
    for b in background.rows() {
        for (mask, t) in table.iter_mut().enumerate() {
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = if mask >> j & 1 == 1 { row[j] } else { b[j] };
            }
            *t += model.predict_row(&z);
        }
    }
    let m = background.n_rows() as f64;
    table.iter_mut().for_each(|t| *t /= m);
    table
}

/// Partial-dependence explainer of predictor `i`: for each row,
/// `mean_b f(r_i, b_{-i})`.
pub fn pdp_explainer<M: Model + ?Sized>(model: &M, data: &Dataset, i: usize, background: &Dataset) -> Result<Vec<f64>> {
    data.check_index(i)?;
    check_background(data, background)?;
    let mask = 1u64 << i;
    Ok(data
        .rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|r| marginal_value(model, r, background, mask))
        .collect())
}

/// Partial-dependence explainers of every predictor.
pub fn pdp_all<M: Model + ?Sized>(model: &M, data: &Dataset, background: &Dataset) -> Result<ExplainerOutput> {
    check_background(data, background)?;
    let p = data.n_features();
    // the PDP of x_i only depends on x_i, so evaluate each distinct value once
    let mut columns = Vec::with_capacity(p);
    for i in 0..p {
        let col = data.column(i);
        let mut distinct = col.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let probe: Vec<f64> = distinct
            .par_iter()
            .map(|&v| {
                let mut row = vec![0.0; p];
                row[i] = v;
                marginal_value(model, &row, background, 1 << i)
            })
            .collect();
        columns.push(
            col.iter()
                .map(|v| probe[distinct.partition_point(|d| d < v)])
                .collect::<Vec<_>>(),
        );
    }
    let n = data.n_rows();
    let mut values = Vec::with_capacity(n * p);
    for r in 0..n {
        values.extend(columns.iter().map(|c| c[r]));
    }
    Ok(ExplainerOutput {
        values,
        n_rows: n,
        n_predictors: p,
        kind: ExplainerKind::Pdp,
        background_size: background.n_rows(),
        base_value: mean_output(model, background),
        approximate: false,
    })
}

fn mean_output<M: Model + ?Sized>(model: &M, background: &Dataset) -> f64 {
    background.rows().map(|b| model.predict_row(b)).sum::<f64>() / background.n_rows() as f64
}

/// Marginal Shapley values of every predictor for every row.
pub fn marginal_shapley<M: Model + ?Sized>(
    model: &M,
    data: &Dataset,
    background: &Dataset,
    mode: ShapleyMode,
) -> Result<ExplainerOutput> {
    check_background(data, background)?;
    let p = data.n_features();
    let rows: Vec<&[f64]> = data.rows().collect();
    let (per_row, approximate): (Vec<Vec<f64>>, bool) = match mode {
        ShapleyMode::Exact => {
            if p > MAX_EXACT_PREDICTORS {
                return Err(Error::TooManyPredictors { n: p, max: MAX_EXACT_PREDICTORS });
            }
            let phi = rows
                .par_iter()
                .map(|r| exact_shapley(p, &marginal_game_table(model, r, background)))
                .collect();
            (phi, false)
        }
        ShapleyMode::Sampled { n_permutations, seed } => {
            if n_permutations < 1 {
                return Err(Error::InvalidParameter("n_permutations must be at least 1".into()));
            }
            if p > 64 {
                return Err(Error::TooManyPredictors { n: p, max: 64 });
            }
            let pairs = n_permutations.div_ceil(2);
            let phi = rows
                .par_iter()
                .enumerate()
                .map(|(k, r)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
                    sampled_shapley(p, pairs, &mut rng, |mask| marginal_value(model, r, background, mask))
                })
                .collect();
            (phi, true)
        }
    };
    Ok(ExplainerOutput {
        values: per_row.concat(),
        n_rows: data.n_rows(),
        n_predictors: p,
        kind: ExplainerKind::MarginalShapley,
        background_size: background.n_rows(),
        base_value: mean_output(model, background),
        approximate,
    })
}

/// The section `t -> f(t at position i, anchor elsewhere)`.
#[derive(Debug, Clone)]
pub struct IceSection<'a, M: ?Sized> {
    model: &'a M,
    anchor: Vec<f64>,
    index: usize,
}

impl<M: Model + ?Sized> IceSection<'_, M> {
    pub fn eval(&self, t: f64) -> f64 {
        let mut z = self.anchor.clone();
        z[self.index] = t;
        self.model.predict_row(&z)
    }

    /// Section values at each row's own value of predictor `i`.
    pub fn materialize(&self, data: &Dataset) -> Vec<f64> {
        let mut z = self.anchor.clone();
        data.rows()
            .map(|r| {
                z[self.index] = r[self.index];
                self.model.predict_row(&z)
            })
            .collect()
    }

    pub fn index(&self) -> usize {
        self.index
    }
}

/// ICE explainer of predictor `i` at `anchor`; the anchor's own value at `i`
/// is ignored.
pub fn ice_explainer<'a, M: Model + ?Sized>(model: &'a M, i: usize, anchor: &[f64]) -> Result<IceSection<'a, M>> {
    if i >= anchor.len() {
        return Err(Error::IndexOutOfRange { index: i, len: anchor.len() });
    }
    if let Some(index) = anchor.iter().enumerate().position(|(j, v)| j != i && !v.is_finite()) {
        return Err(Error::NonFiniteSample { index });
    }
    Ok(IceSection { model, anchor: anchor.to_vec(), index: i })
}
