//! Compressive predictor transforms and the post-processed models built
//! from them.
//!
//! Every transform is a strictly increasing map of one predictor with a
//! fixed point at the focal value `t*`, the identity at `a = 1`, and
//! contraction towards `t*` as `a` grows.

use serde::{Deserialize, Serialize};

use crate::attribution::ImpactList;
use crate::calibrate::CalibrationMap;
use crate::data::Dataset;
use crate::empirical::{ks_statistic, EmpiricalDistribution};
use crate::error::{Error, Result};
use crate::model::Model;

/// Smallest certified compression parameter of the local transform.
pub const LOCAL_MIN_A: f64 = 0.4;
/// Grid size of the runtime monotonicity check.
pub const MONOTONE_CHECK_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    /// `(t - t*) / a + t*`.
    Global { a: f64 },
    /// `min(t - t*, 0) / a_minus + max(t - t*, 0) / a_plus + t*`.
    Asymmetric { a_minus: f64, a_plus: f64 },
    /// `t - (t - t*)(1 - 1/a) exp(-(t - t*)^2 / (2 sigma^2))`.
    Local { a: f64, sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Global,
    Asymmetric,
    Local,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn transform_global(t: f64, a: f64, t_star: f64) -> Result<f64> {
    positive("a", a)?;
    Ok((t - t_star) / a + t_star)
}

pub fn transform_asymmetric(t: f64, a_minus: f64, a_plus: f64, t_star: f64) -> Result<f64> {
    positive("a_minus", a_minus)?;
    positive("a_plus", a_plus)?;
    Ok(Transform::Asymmetric { a_minus, a_plus }.apply(t, t_star))
}

pub fn transform_local(t: f64, a: f64, sigma: f64, t_star: f64) -> Result<f64> {
    let tr = Transform::Local { a, sigma };
    tr.validate()?;
    Ok(tr.apply(t, t_star))
}

impl Transform {
    pub fn kind(&self) -> TransformKind {
        match self {
            Transform::Global { .. } => TransformKind::Global,
            Transform::Asymmetric { .. } => TransformKind::Asymmetric,
            Transform::Local { .. } => TransformKind::Local,
        }
    }

    /// The identity member of a family. The local family uses `sigma = 1`.
    pub fn identity(kind: TransformKind) -> Self {
        match kind {
            TransformKind::Global => Transform::Global { a: 1.0 },
            TransformKind::Asymmetric => Transform::Asymmetric { a_minus: 1.0, a_plus: 1.0 },
            TransformKind::Local => Transform::Local { a: 1.0, sigma: 1.0 },
        }
    }

    /// Checks parameter signs and, for the local family, the certified
    /// monotone region `a >= 0.4`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Transform::Global { a } => positive("a", a),
            Transform::Asymmetric { a_minus, a_plus } => {
                positive("a_minus", a_minus)?;
                positive("a_plus", a_plus)
            }
            Transform::Local { a, sigma } => {
                positive("sigma", sigma)?;
                positive("a", a)?;
                if a < LOCAL_MIN_A {
                    return Err(Error::InvalidParameter(format!(
                        "local transform with a = {a} is outside the certified monotone region a >= {LOCAL_MIN_A}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Evaluates the map; parameters are assumed valid.
    #[inline]
    pub fn apply(&self, t: f64, t_star: f64) -> f64 {
        let u = t - t_star;
        match *self {
            Transform::Global { a: 1.0 } => t,
            Transform::Global { a } => u / a + t_star,
            Transform::Asymmetric { a_minus, a_plus } if a_minus == 1.0 && a_plus == 1.0 => t,
            Transform::Asymmetric { a_minus, a_plus } => u.min(0.0) / a_minus + u.max(0.0) / a_plus + t_star,
            Transform::Local { a, sigma } => t - u * (1.0 - 1.0 / a) * (-(u * u) / (2.0 * sigma * sigma)).exp(),
        }
    }

    /// Derivative in `t`; the asymmetric map uses its right derivative at `t*`.
    pub fn derivative(&self, t: f64, t_star: f64) -> f64 {
        let u = t - t_star;
        match *self {
            Transform::Global { a } => 1.0 / a,
            Transform::Asymmetric { a_minus, a_plus } => {
                if u < 0.0 {
                    1.0 / a_minus
                } else {
                    1.0 / a_plus
                }
            }
            Transform::Local { a, sigma } => {
                let s = u * u / (sigma * sigma);
                1.0 - (1.0 - 1.0 / a) * (-0.5 * s).exp() * (1.0 - s)
            }
        }
    }

    /// Rejects the map unless its derivative is positive on a uniform grid of
    /// [`MONOTONE_CHECK_POINTS`] points spanning `[lo, hi]`.
    pub fn check_monotone(&self, lo: f64, hi: f64, t_star: f64) -> Result<()> {
        self.validate()?;
        let m = MONOTONE_CHECK_POINTS;
        for k in 0..m {
            let t = lo + (hi - lo) * k as f64 / (m - 1) as f64;
            let d = self.derivative(t, t_star);
            if !(d > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{self:?} is not increasing at t = {t} (derivative {d})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocalRule {
    Mean,
    /// Lower median, `inf { x : F(x) >= 1/2 }`.
    Median,
    /// Smallest pooled sample point maximising `|F0 - F1|`.
    KsArgmax,
    /// Supplied by the caller.
    Fixed,
}

/// Focal point of predictor `i` under `rule`. [`FocalRule::Fixed`] has no
/// data-driven value and is rejected here.
pub fn focal_point(data: &Dataset, i: usize, rule: FocalRule) -> Result<f64> {
    data.check_index(i)?;
    if data.n_rows() == 0 {
        return Err(Error::EmptySample);
    }
    let col = data.column(i);
    match rule {
        FocalRule::Mean => Ok(col.iter().sum::<f64>() / col.len() as f64),
        FocalRule::Median => Ok(EmpiricalDistribution::new(&col)?.quantile(0.5)),
        FocalRule::KsArgmax => {
            let mut split: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
            for (v, &g) in col.iter().zip(data.g()) {
                split[usize::from(g != 0)].push(*v);
            }
            for class in 0..2u8 {
                if split[class as usize].is_empty() {
                    return Err(Error::MissingClass { cell: "all".into(), class });
                }
            }
            let d0 = EmpiricalDistribution::new(&split[0])?;
            let d1 = EmpiricalDistribution::new(&split[1])?;
            Ok(ks_statistic(&d0, &d1).argmax)
        }
        FocalRule::Fixed => Err(Error::InvalidParameter("a fixed focal point must be given explicitly".into())),
    }
}

/// Transform of one predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorTransform {
    pub predictor: String,
    pub index: usize,
    #[serde(flatten)]
    pub transform: Transform,
    pub focal_rule: FocalRule,
    pub focal: f64,
}

/// Parameters of a compressive post-processing: one transform per selected
/// predictor.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CompressiveParams {
    pub transforms: Vec<PredictorTransform>,
}

impl CompressiveParams {
    pub fn indices(&self) -> Vec<usize> {
        self.transforms.iter().map(|t| t.index).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (k, t) in self.transforms.iter().enumerate() {
            t.transform.validate()?;
            if !t.focal.is_finite() {
                return Err(Error::InvalidParameter(format!("focal point of {} is not finite", t.predictor)));
            }
            if self.transforms[..k].iter().any(|o| o.index == t.index) {
                return Err(Error::InvalidParameter(format!("predictor {} transformed twice", t.predictor)));
            }
        }
        Ok(())
    }

    /// Transforms the coordinates of `row` in place.
    #[inline]
    pub fn apply_row(&self, row: &mut [f64]) {
        for t in &self.transforms {
            row[t.index] = t.transform.apply(row[t.index], t.focal);
        }
    }

    /// A copy of `data` with every selected column transformed.
    pub fn apply_dataset(&self, data: &Dataset) -> Dataset {
        let mut out = data.clone();
        for t in &self.transforms {
            out = out.map_column(t.index, |v| t.transform.apply(v, t.focal));
        }
        out
    }

    /// Runs the grid monotonicity check of every transform over the observed
    /// range of its column.
    pub fn certify(&self, data: &Dataset) -> Result<()> {
        self.validate()?;
        for t in &self.transforms {
            let col = data.column(t.index);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min).min(t.focal);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(t.focal);
            t.transform.check_monotone(lo, hi, t.focal)?;
        }
        Ok(())
    }
}

/// `C(f(T(x_M), x_{-M}))`: transformed inputs, then the base model, then an
/// optional calibration map.
#[derive(Debug, Clone)]
pub struct PostProcessedModel<'a, M: ?Sized> {
    base: &'a M,
    params: CompressiveParams,
    calibration: Option<CalibrationMap>,
}

impl<'a, M: Model + ?Sized> PostProcessedModel<'a, M> {
    pub fn params(&self) -> &CompressiveParams {
        &self.params
    }

    pub fn calibration(&self) -> Option<&CalibrationMap> {
        self.calibration.as_ref()
    }

    pub fn with_calibration(mut self, map: Option<CalibrationMap>) -> Self {
        self.calibration = map;
        self
    }

    /// Output before calibration.
    pub fn predict_uncalibrated(&self, x: &[f64]) -> f64 {
        let mut z = x.to_vec();
        self.params.apply_row(&mut z);
        self.base.predict_row(&z)
    }
}

impl<M: Model + ?Sized> Model for PostProcessedModel<'_, M> {
    fn predict_row(&self, x: &[f64]) -> f64 {
        let s = self.predict_uncalibrated(x);
        match &self.calibration {
            Some(c) => c.apply(s),
            None => s,
        }
    }
}

/// Wraps `model` with the transforms in `params`, which must cover exactly
/// the predictors of `impact`.
pub fn build_postprocessed<'a, M: Model + ?Sized>(
    model: &'a M,
    impact: &ImpactList,
    params: CompressiveParams,
) -> Result<PostProcessedModel<'a, M>> {
    params.validate()?;
    let mut covered = params.indices();
    covered.sort_unstable();
    if covered != impact.m {
        return Err(Error::InvalidParameter(format!(
            "transforms cover predictors {covered:?} but the impact list is {:?}",
            impact.m
        )));
    }
    Ok(PostProcessedModel { base: model, params, calibration: None })
}
