//! Monotone recalibration of post-processed scores and rank metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::logistic::{fit_logistic_design, LogisticOptions};

/// Probability clamp applied before taking logits.
pub const DEFAULT_CLAMP: f64 = 1e-6;

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn clamped_logit(p: f64, delta: f64) -> f64 {
    logit(p.clamp(delta, 1.0 - delta))
}

/// A nondecreasing map applied to model scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CalibrationMap {
    /// Step function: `levels[k]` on `[knots[k], knots[k+1])`, the first level
    /// below the first knot.
    Pava { knots: Vec<f64>, levels: Vec<f64> },
    /// `sigmoid(intercept + slope * logit(s))` fitted against labels.
    LogisticRefit { intercept: f64, slope: f64, clamp: f64 },
    /// `sigmoid(intercept + slope * logit(s))` fitted against base scores.
    LinkLinear { intercept: f64, slope: f64, clamp: f64 },
}

impl CalibrationMap {
    pub fn apply(&self, s: f64) -> f64 {
        match self {
            CalibrationMap::Pava { knots, levels } => {
                let k = knots.partition_point(|&x| x <= s);
                levels[k.saturating_sub(1)]
            }
            CalibrationMap::LogisticRefit { intercept, slope, clamp }
            | CalibrationMap::LinkLinear { intercept, slope, clamp } => {
                sigmoid(intercept + slope * clamped_logit(s, *clamp))
            }
        }
    }

    pub fn apply_all(&self, scores: &[f64]) -> Vec<f64> {
        scores.iter().map(|&s| self.apply(s)).collect()
    }
}

/// A fitted map plus anything the fit had to work around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub map: CalibrationMap,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Weighted least-squares isotonic fit of `y` (already in `x` order).
/// Returns one fitted value per input.
pub fn isotonic_fit(y: &[f64], w: &[f64]) -> Vec<f64> {
    // blocks of (weighted mean, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&v, &wt) in y.iter().zip(w) {
        blocks.push((v, wt, 1));
        while blocks.len() > 1 {
            let (m2, w2, c2) = blocks[blocks.len() - 1];
            let (m1, w1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let wsum = w1 + w2;
            let mean = if wsum > 0.0 { (m1 * w1 + m2 * w2) / wsum } else { 0.5 * (m1 + m2) };
            *blocks.last_mut().unwrap() = (mean, wsum, c1 + c2);
        }
    }
    blocks.iter().flat_map(|&(m, _, c)| std::iter::repeat_n(m, c)).collect()
}

/// Isotonic regression of `y` on `x` by pool-adjacent-violators. Tied `x`
/// values are pooled first so that the result is a function of `x`.
pub fn pava_isotonic(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<CalibrationMap> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { what: "isotonic targets", expected: x.len(), found: y.len() });
    }
    if x.is_empty() {
        return Err(Error::EmptySample);
    }
    let ones = vec![1.0; x.len()];
    let w = weights.unwrap_or(&ones);
    if w.len() != x.len() {
        return Err(Error::LengthMismatch { what: "isotonic weights", expected: x.len(), found: w.len() });
    }
    if let Some(index) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidWeight { index });
    }
    if let Some(index) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample { index: index % x.len() });
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let (mut knots, mut ys, mut ws): (Vec<f64>, Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new(), Vec::new());
    for i in order {
        if knots.last() == Some(&x[i]) {
            let k = ys.len() - 1;
            let wsum = ws[k] + w[i];
            if wsum > 0.0 {
                ys[k] = (ys[k] * ws[k] + y[i] * w[i]) / wsum;
            }
            ws[k] = wsum;
        } else {
            knots.push(x[i]);
            ys.push(y[i]);
            ws.push(w[i]);
        }
    }
    let levels = isotonic_fit(&ys, &ws);
    Ok(CalibrationMap::Pava { knots, levels })
}

/// Link-space linear recalibration of post-processed scores against the base
/// model's scores: least squares of `logit f` on `logit f~`.
///
/// Fails when the fitted slope is not positive, since the map would then
/// reverse the score ranking.
pub fn link_linear_calibrate(post_scores: &[f64], base_scores: &[f64]) -> Result<CalibrationMap> {
    if post_scores.len() != base_scores.len() {
        return Err(Error::LengthMismatch {
            what: "base scores",
            expected: post_scores.len(),
            found: base_scores.len(),
        });
    }
    if post_scores.is_empty() {
        return Err(Error::EmptySample);
    }
    let xs: Vec<f64> = post_scores.iter().map(|&s| clamped_logit(s, DEFAULT_CLAMP)).collect();
    let ys: Vec<f64> = base_scores.iter().map(|&s| clamped_logit(s, DEFAULT_CLAMP)).collect();
    if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample { index: 0 });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    // rounding in the mean leaves a tiny positive sxx for constant input
    if !(sxx > n * (1e-12 * mx.abs().max(1.0)).powi(2)) {
        return Err(Error::CalibrationFailure("post-processed scores are constant".into()));
    }
    let slope = sxy / sxx;
    if !(slope > 0.0) {
        return Err(Error::CalibrationFailure(format!("link slope {slope} is not positive")));
    }
    Ok(CalibrationMap::LinkLinear { intercept: my - slope * mx, slope, clamp: DEFAULT_CLAMP })
}

/// Ridge penalty of the separation fallback.
pub const SEPARATION_RIDGE: f64 = 1e-2;

/// One-dimensional logistic regression of labels on `logit(score)`.
///
/// When the labels are a single class or perfectly separated by the score,
/// the unpenalised maximum likelihood does not exist; the fit then adds a
/// small ridge penalty so that the coefficients stay bounded, and says so.
pub fn logistic_refit(post_scores: &[f64], labels: &[f64]) -> Result<CalibrationFit> {
    if post_scores.len() != labels.len() {
        return Err(Error::LengthMismatch { what: "labels", expected: post_scores.len(), found: labels.len() });
    }
    if post_scores.is_empty() {
        return Err(Error::EmptySample);
    }
    check_binary(labels)?;
    let z: Vec<f64> = post_scores.iter().map(|&s| clamped_logit(s, DEFAULT_CLAMP)).collect();
    let mut warnings = Vec::new();
    let separated = separated(&z, labels);
    let ridge = if separated {
        warnings.push(format!(
            "labels are separated by the scores; using ridge-bounded coefficients (penalty {SEPARATION_RIDGE})"
        ));
        SEPARATION_RIDGE
    } else {
        0.0
    };
    let opts = LogisticOptions { ridge, ..LogisticOptions::default() };
    let fit = fit_logistic_design(&z, 1, labels, &opts)?;
    if !fit.converged {
        warnings.push(format!("Newton iterations stopped at gradient norm {:e}", fit.gradient_norm));
    }
    Ok(CalibrationFit {
        map: CalibrationMap::LogisticRefit { intercept: fit.intercept, slope: fit.coefficients[0], clamp: DEFAULT_CLAMP },
        warnings,
    })
}

fn check_binary(labels: &[f64]) -> Result<()> {
    match labels.iter().find(|&&v| v != 0.0 && v != 1.0) {
        Some(&v) => Err(Error::NonBinaryLabel(v)),
        None => Ok(()),
    }
}

/// True when one label class is empty or the two classes occupy disjoint
/// ranges of `z`.
fn separated(z: &[f64], labels: &[f64]) -> bool {
    let range = |cls: f64| {
        z.iter()
            .zip(labels)
            .filter(|(_, &y)| y == cls)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| (lo.min(v), hi.max(v)))
    };
    let (lo0, hi0) = range(0.0);
    let (lo1, hi1) = range(1.0);
    if lo0 > hi0 || lo1 > hi1 {
        return true;
    }
    hi0 <= lo1 || hi1 <= lo0
}

/// Which calibration to fit after post-processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    /// Isotonic regression onto the target.
    Pava,
    /// Logistic regression of the labels.
    LogisticRefit,
    /// Link-space linear regression onto the base scores.
    #[default]
    LinkLinear,
}

/// What the isotonic fit regresses onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationTarget {
    #[default]
    BaseScores,
    Labels,
}

/// Fits `method` on rows where both the post-processed and base scores (and
/// labels) are known.
pub fn fit_calibration(
    method: CalibrationMethod,
    target: CalibrationTarget,
    post_scores: &[f64],
    base_scores: &[f64],
    labels: &[f64],
) -> Result<CalibrationFit> {
    match method {
        CalibrationMethod::LinkLinear => Ok(CalibrationFit {
            map: link_linear_calibrate(post_scores, base_scores)?,
            warnings: Vec::new(),
        }),
        CalibrationMethod::LogisticRefit => logistic_refit(post_scores, labels),
        CalibrationMethod::Pava => {
            let y = match target {
                CalibrationTarget::BaseScores => base_scores,
                CalibrationTarget::Labels => labels,
            };
            Ok(CalibrationFit { map: pava_isotonic(post_scores, y, None)?, warnings: Vec::new() })
        }
    }
}

/// Area under the ROC curve as the Mann–Whitney statistic; tied scores
/// across classes count one half.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { what: "labels", expected: scores.len(), found: labels.len() });
    }
    check_binary(labels)?;
    let n1 = labels.iter().filter(|&&y| y == 1.0).count();
    let n0 = labels.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the count of (negative below positive) pairs plus tied pairs, in integers
    let mut twice_wins: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        let (mut pos, mut neg) = (0u128, 0u128);
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            if labels[order[end]] == 1.0 {
                pos += 1;
            } else {
                neg += 1;
            }
            end += 1;
        }
        twice_wins += pos * (2 * neg_below + neg);
        neg_below += neg;
        k = end;
    }
    Ok(twice_wins as f64 / (2.0 * n0 as f64 * n1 as f64))
}
