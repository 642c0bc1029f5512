//! The post-processed family: compressive transforms of the selected
//! predictors followed by recalibration.

use serde::{Deserialize, Serialize};

use crate::attribution::ImpactList;
use crate::bias::{PartitionIndex, PartitionSpec};
use crate::calibrate::{fit_calibration, CalibrationMap, CalibrationMethod, CalibrationTarget};
use crate::data::Dataset;
use crate::empirical::Favorable;
use crate::error::{Error, Result};
use crate::learn::metrics::log_loss;
use crate::model::Model;
use crate::transform::{
    build_postprocessed, focal_point, CompressiveParams, FocalRule, PredictorTransform, Transform, TransformKind,
    LOCAL_MIN_A,
};

use super::{search, Family, Frontier, Metrics, ParamBound, PointEval, SearchSpace};

/// Training, holdout and test splits. The search only looks at the holdout;
/// the test split scores the final frontier. Focal points come from `train`.
#[derive(Debug, Clone, Copy)]
pub struct Splits<'a> {
    pub train: &'a Dataset,
    pub holdout: &'a Dataset,
    pub test: &'a Dataset,
}

/// Settings of the post-processed family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSearch {
    pub kind: TransformKind,
    /// Bounds of every compression factor (`a`, `a_minus`, `a_plus`).
    pub a_bounds: (f64, f64),
    /// Bounds of the local width `sigma`.
    pub sigma_bounds: (f64, f64),
    pub focal_rule: FocalRule,
    /// Per-predictor focal rule overriding `focal_rule`.
    #[serde(default)]
    pub focal_overrides: Vec<(usize, FocalRule)>,
    /// When set, focal points are searched in `focal ± halfwidth`.
    pub focal_halfwidth: Option<f64>,
    pub calibration: CalibrationMethod,
    pub calibration_target: CalibrationTarget,
    pub partition: PartitionSpec,
    pub favorable: Favorable,
}

impl Default for TransformSearch {
    fn default() -> Self {
        Self {
            kind: TransformKind::Global,
            a_bounds: (0.5, 2.0),
            sigma_bounds: (1.0, 2.0),
            focal_rule: FocalRule::Mean,
            focal_overrides: Vec::new(),
            focal_halfwidth: None,
            calibration: CalibrationMethod::default(),
            calibration_target: CalibrationTarget::default(),
            partition: PartitionSpec::statistical_parity(),
            favorable: Favorable::Up,
        }
    }
}

impl TransformSearch {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.a_bounds;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::EmptySearchSpace(format!("compression bounds [{lo}, {hi}] must be positive and ordered")));
        }
        if self.kind == TransformKind::Local {
            if lo < LOCAL_MIN_A {
                return Err(Error::InvalidParameter(format!(
                    "local transforms need a >= {LOCAL_MIN_A} to stay monotone, bounds start at {lo}"
                )));
            }
            let (slo, shi) = self.sigma_bounds;
            if !(slo > 0.0 && slo <= shi && shi.is_finite()) {
                return Err(Error::EmptySearchSpace(format!("sigma bounds [{slo}, {shi}] must be positive and ordered")));
            }
        }
        if let Some(h) = self.focal_halfwidth {
            if !(h >= 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter(format!("focal halfwidth must be nonnegative, got {h}")));
            }
        }
        Ok(())
    }

    fn rule_for(&self, index: usize) -> FocalRule {
        self.focal_overrides.iter().find(|(i, _)| *i == index).map_or(self.focal_rule, |(_, r)| *r)
    }
}

struct SplitCache<'a> {
    data: &'a Dataset,
    base: Vec<f64>,
    index: PartitionIndex,
}

impl<'a> SplitCache<'a> {
    fn new<M: Model + ?Sized>(model: &M, data: &'a Dataset, partition: &PartitionSpec) -> Result<Self> {
        let y = partition.needs_labels().then(|| data.y());
        Ok(Self { data, base: model.predict(data), index: PartitionIndex::new(data.g(), y, partition)? })
    }

    fn metrics(&self, scores: &[f64], favorable: Favorable) -> Result<Metrics> {
        Ok(Metrics { loss: log_loss(self.data.y(), scores), bias: self.index.transport(scores, favorable)?.total })
    }
}

struct Member {
    index: usize,
    name: String,
    focal_rule: FocalRule,
    focal: f64,
}

/// The post-processed models `C(f(T(x_M; gamma), x_{-M}))` of one base model.
pub struct TransformFamily<'a, M: ?Sized> {
    model: &'a M,
    impact: ImpactList,
    settings: TransformSearch,
    members: Vec<Member>,
    bounds: Vec<ParamBound>,
    holdout: SplitCache<'a>,
    test: SplitCache<'a>,
}

/// Result of [`TransformFamily::fit`]: calibrated holdout and test scores.
struct Fitted {
    holdout: Vec<f64>,
    test: Vec<f64>,
    calibrated: bool,
    warnings: Vec<String>,
}

impl<'a, M: Model + ?Sized> TransformFamily<'a, M> {
    pub fn new(model: &'a M, splits: Splits<'a>, impact: &ImpactList, settings: TransformSearch) -> Result<Self> {
        settings.validate()?;
        if impact.m.is_empty() {
            return Err(Error::EmptySearchSpace("the impact list is empty".into()));
        }
        let mut members = Vec::with_capacity(impact.m.len());
        let mut bounds = Vec::new();
        for &i in &impact.m {
            splits.train.check_index(i)?;
            let rule = settings.rule_for(i);
            let focal = focal_point(splits.train, i, rule)?;
            let name = splits.train.names()[i].clone();
            let (lo, hi) = settings.a_bounds;
            match settings.kind {
                TransformKind::Global => bounds.push(ParamBound::new(format!("a_{name}"), lo, hi)),
                TransformKind::Asymmetric => {
                    bounds.push(ParamBound::new(format!("a_minus_{name}"), lo, hi));
                    bounds.push(ParamBound::new(format!("a_plus_{name}"), lo, hi));
                }
                TransformKind::Local => {
                    bounds.push(ParamBound::new(format!("a_{name}"), lo, hi));
                    let (slo, shi) = settings.sigma_bounds;
                    bounds.push(ParamBound::new(format!("sigma_{name}"), slo, shi));
                }
            }
            if let Some(h) = settings.focal_halfwidth {
                bounds.push(ParamBound::new(format!("focal_{name}"), focal - h, focal + h));
            }
            members.push(Member { index: i, name, focal_rule: rule, focal });
        }
        Ok(Self {
            model,
            impact: impact.clone(),
            holdout: SplitCache::new(model, splits.holdout, &settings.partition)?,
            test: SplitCache::new(model, splits.test, &settings.partition)?,
            settings,
            members,
            bounds,
        })
    }

    /// Decodes a parameter vector laid out as in [`Family::bounds`].
    pub fn params(&self, gamma: &[f64]) -> CompressiveParams {
        let mut it = gamma.iter().copied();
        let mut next = || it.next().expect("parameter vector matches the bounds");
        let transforms = self
            .members
            .iter()
            .map(|m| {
                let transform = match self.settings.kind {
                    TransformKind::Global => Transform::Global { a: next() },
                    TransformKind::Asymmetric => Transform::Asymmetric { a_minus: next(), a_plus: next() },
                    TransformKind::Local => Transform::Local { a: next(), sigma: next() },
                };
                let (focal_rule, focal) = match self.settings.focal_halfwidth {
                    Some(_) => (FocalRule::Fixed, next()),
                    None => (m.focal_rule, m.focal),
                };
                PredictorTransform { predictor: m.name.clone(), index: m.index, transform, focal_rule, focal }
            })
            .collect();
        CompressiveParams { transforms }
    }

    /// Post-processes with `params`, fits the calibration on the holdout and
    /// returns the calibration map (if it succeeded) with both score vectors.
    fn fit(&self, params: CompressiveParams) -> Result<(Option<CalibrationMap>, Fitted)> {
        params.certify(self.holdout.data)?;
        let post = build_postprocessed(self.model, &self.impact, params)?;
        let raw_h = post.predict(self.holdout.data);
        let raw_t = post.predict(self.test.data);
        let fit = fit_calibration(
            self.settings.calibration,
            self.settings.calibration_target,
            &raw_h,
            &self.holdout.base,
            self.holdout.data.y(),
        );
        match fit {
            Ok(f) => {
                let fitted = Fitted {
                    holdout: f.map.apply_all(&raw_h),
                    test: f.map.apply_all(&raw_t),
                    calibrated: true,
                    warnings: f.warnings,
                };
                Ok((Some(f.map), fitted))
            }
            Err(e @ Error::CalibrationFailure(_)) => {
                let warnings = vec![format!("calibration failed, using uncalibrated scores: {e}")];
                Ok((None, Fitted { holdout: raw_h, test: raw_t, calibrated: false, warnings }))
            }
            Err(e) => Err(e),
        }
    }

    /// The calibration map fitted for `gamma`, or `None` if calibration failed.
    pub fn calibration_for(&self, gamma: &[f64]) -> Result<Option<CalibrationMap>> {
        Ok(self.fit(self.params(gamma))?.0)
    }

    /// Parameter vector of the identity transform.
    pub fn identity(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.bounds.len());
        for m in &self.members {
            match self.settings.kind {
                TransformKind::Global => out.push(1.0),
                TransformKind::Asymmetric => out.extend([1.0, 1.0]),
                TransformKind::Local => out.extend([1.0, self.settings.sigma_bounds.0]),
            }
            if self.settings.focal_halfwidth.is_some() {
                out.push(m.focal);
            }
        }
        out
    }
}

impl<M: Model + ?Sized> Family for TransformFamily<'_, M> {
    fn bounds(&self) -> &[ParamBound] {
        &self.bounds
    }

    fn evaluate(&self, gamma: &[f64]) -> Result<PointEval> {
        let (_, f) = self.fit(self.params(gamma))?;
        Ok(PointEval {
            holdout: self.holdout.metrics(&f.holdout, self.settings.favorable)?,
            test: self.test.metrics(&f.test, self.settings.favorable)?,
            calibrated: f.calibrated,
            warnings: f.warnings,
        })
    }

    fn describe(&self, gamma: &[f64]) -> serde_json::Value {
        serde_json::to_value(self.params(gamma)).unwrap_or(serde_json::Value::Null)
    }

    fn reference(&self) -> Option<PointEval> {
        let fav = self.settings.favorable;
        Some(PointEval {
            holdout: self.holdout.metrics(&self.holdout.base, fav).ok()?,
            test: self.test.metrics(&self.test.base, fav).ok()?,
            calibrated: false,
            warnings: Vec::new(),
        })
    }
}

/// Penalised objective `loss + omega * bias` of one post-processed model on
/// `data`, with the calibration fitted on the same rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub value: f64,
    pub loss: f64,
    pub bias: f64,
    pub calibrated: bool,
}

pub fn objective<M: Model + ?Sized>(
    model: &M,
    params: &CompressiveParams,
    data: &Dataset,
    omega: f64,
    partition: &PartitionSpec,
    favorable: Favorable,
    calibration: CalibrationMethod,
) -> Result<Objective> {
    let impact = ImpactList::fixed(&params.indices());
    let cache = SplitCache::new(model, data, partition)?;
    params.certify(data)?;
    let post = build_postprocessed(model, &impact, params.clone())?;
    let raw = post.predict(data);
    let (scores, calibrated) =
        match fit_calibration(calibration, CalibrationTarget::BaseScores, &raw, &cache.base, data.y()) {
            Ok(f) => (f.map.apply_all(&raw), true),
            Err(Error::CalibrationFailure(_)) => (raw, false),
            Err(e) => return Err(e),
        };
    let m = cache.metrics(&scores, favorable)?;
    Ok(Objective { value: m.loss + omega * m.bias, loss: m.loss, bias: m.bias, calibrated })
}

/// Frontier reconstruction over the post-processed family of `model`.
pub fn run_algorithm1<M: Model + ?Sized>(
    model: &M,
    splits: Splits<'_>,
    impact: &ImpactList,
    settings: &TransformSearch,
    space: &SearchSpace,
) -> Result<Frontier> {
    let family = TransformFamily::new(model, splits, impact, settings.clone())?;
    search(&family, space)
}
