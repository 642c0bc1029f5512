//! Empirical distributions on the real line.
//!
//! An [`EmpiricalDistribution`] is a finite set of weighted atoms with a
//! right-continuous step CDF and the generalized inverse
//!
//! ```text
//! F^[-1](p) = inf { x : p <= F(x) },   p in (0, 1]
//! ```
//!
//! Transport distances are computed exactly: both quantile functions are
//! piecewise constant in `p`, so `W1 = ∫ |F0^[-1](p) - F1^[-1](p)| dp` is a
//! finite sum over the pooled set of cumulative-probability breakpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign convention for which direction of the model output is favorable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Favorable {
    /// Larger outputs favor the input.
    #[default]
    Up,
    /// Smaller outputs favor the input.
    Down,
}

impl Favorable {
    pub fn sign(self) -> f64 {
        match self {
            Favorable::Up => 1.0,
            Favorable::Down => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Favorable::Up => Favorable::Down,
            Favorable::Down => Favorable::Up,
        }
    }
}

impl std::str::FromStr for Favorable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "up" | "+1" | "1" | "+" => Ok(Favorable::Up),
            "down" | "-1" | "-" => Ok(Favorable::Down),
            other => Err(Error::InvalidParameter(format!(
                "favorable direction `{other}` (expected up or down)"
            ))),
        }
    }
}

/// Transport cost split by the direction in which the `d0` distribution moves.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SignedTransport {
    pub total: f64,
    /// Mass-weighted distance over quantile levels where `(q0 - q1) * sign > 0`.
    pub positive_part: f64,
    /// Same, where `(q0 - q1) * sign < 0`.
    pub negative_part: f64,
}

impl SignedTransport {
    pub fn net(&self) -> f64 {
        self.positive_part - self.negative_part
    }

    pub(crate) fn scaled(self, w: f64) -> Self {
        SignedTransport {
            total: self.total * w,
            positive_part: self.positive_part * w,
            negative_part: self.negative_part * w,
        }
    }

    pub(crate) fn accumulate(&mut self, other: SignedTransport) {
        self.positive_part += other.positive_part;
        self.negative_part += other.negative_part;
        self.total = self.positive_part + self.negative_part;
    }
}

/// Sorted, normalized empirical distribution with tied samples merged into
/// single atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Uniformly weighted distribution of `samples`.
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        check_finite(samples)?;
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut values = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for v in sorted {
            match values.last() {
                Some(&last) if last == v => *counts.last_mut().unwrap() += 1,
                _ => {
                    values.push(v);
                    counts.push(1);
                }
            }
        }
        // Cumulative probabilities from integer counts so that equal-size
        // samples share bit-identical breakpoints.
        let n = samples.len() as f64;
        let mut running = 0usize;
        let mut cumulative = Vec::with_capacity(values.len());
        let mut weights = Vec::with_capacity(values.len());
        for c in counts {
            running += c;
            cumulative.push(running as f64 / n);
            weights.push(c as f64 / n);
        }
        Ok(Self {
            values,
            weights,
            cumulative,
        })
    }

    /// Distribution with per-sample nonnegative weights, normalized to sum to one.
    pub fn with_weights(samples: &[f64], weights: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        if weights.len() != samples.len() {
            return Err(Error::LengthMismatch {
                what: "weights",
                expected: samples.len(),
                found: weights.len(),
            });
        }
        check_finite(samples)?;
        if let Some(index) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidWeight { index });
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroTotalWeight);
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));
        let mut values: Vec<f64> = Vec::new();
        let mut raw: Vec<f64> = Vec::new();
        for i in order {
            if weights[i] == 0.0 {
                continue;
            }
            match values.last() {
                Some(&last) if last == samples[i] => *raw.last_mut().unwrap() += weights[i],
                _ => {
                    values.push(samples[i]);
                    raw.push(weights[i]);
                }
            }
        }
        let mut running = 0.0;
        let mut cumulative = Vec::with_capacity(raw.len());
        let mut normalized = Vec::with_capacity(raw.len());
        for w in raw {
            running += w;
            cumulative.push(running / total);
            normalized.push(w / total);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(Self {
            values,
            weights: normalized,
            cumulative,
        })
    }

    /// Distinct support points in increasing order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Probability mass of each support point.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .sum()
    }

    /// `P(X <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        let k = self.values.partition_point(|&v| v <= t);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Generalized inverse `inf { x : p <= F(x) }`. Levels at or below zero
    /// return the minimum, levels above one the maximum.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return self.values[0];
        }
        let k = self.cumulative.partition_point(|&c| c < p);
        self.values[k.min(self.values.len() - 1)]
    }

    /// Applies `x -> scale * x + shift` to every atom; `scale` must be positive.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        debug_assert!(scale > 0.0);
        Self {
            values: self.values.iter().map(|v| scale * v + shift).collect(),
            weights: self.weights.clone(),
            cumulative: self.cumulative.clone(),
        }
    }
}

fn check_finite(samples: &[f64]) -> Result<()> {
    match samples.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFiniteSample { index }),
        None => Ok(()),
    }
}

/// Walks the pooled breakpoints of both quantile functions, calling `visit`
/// with `(dp, q0, q1)` for every interval of constant quantiles.
fn for_each_quantile_interval(
    d0: &EmpiricalDistribution,
    d1: &EmpiricalDistribution,
    mut visit: impl FnMut(f64, f64, f64),
) {
    let (mut i, mut j) = (0, 0);
    let mut prev = 0.0;
    let (n0, n1) = (d0.values.len(), d1.values.len());
    while i < n0 && j < n1 {
        let c0 = d0.cumulative[i];
        let c1 = d1.cumulative[j];
        let next = c0.min(c1);
        let dp = next - prev;
        if dp > 0.0 {
            visit(dp, d0.values[i], d1.values[j]);
        }
        prev = next;
        if c0 <= next {
            i += 1;
        }
        if c1 <= next {
            j += 1;
        }
    }
}

/// 1-Wasserstein distance between two empirical distributions.
pub fn wasserstein1(d0: &EmpiricalDistribution, d1: &EmpiricalDistribution) -> f64 {
    wasserstein1_signed(d0, d1, Favorable::Up).total
}

/// 1-Wasserstein distance split into the transport of `d0` in the
/// non-favorable (positive) and favorable (negative) directions.
pub fn wasserstein1_signed(
    d0: &EmpiricalDistribution,
    d1: &EmpiricalDistribution,
    favorable: Favorable,
) -> SignedTransport {
    let sign = favorable.sign();
    let mut pos = 0.0;
    let mut neg = 0.0;
    for_each_quantile_interval(d0, d1, |dp, q0, q1| {
        let d = (q0 - q1) * sign;
        if d > 0.0 {
            pos += d * dp;
        } else if d < 0.0 {
            neg -= d * dp;
        }
    });
    SignedTransport {
        total: pos + neg,
        positive_part: pos,
        negative_part: neg,
    }
}

/// Kolmogorov–Smirnov statistic together with the smallest support point
/// where it is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsStatistic {
    pub distance: f64,
    pub argmax: f64,
}

pub fn ks_statistic(d0: &EmpiricalDistribution, d1: &EmpiricalDistribution) -> KsStatistic {
    let (mut i, mut j) = (0, 0);
    let (n0, n1) = (d0.values.len(), d1.values.len());
    let mut best = KsStatistic {
        distance: 0.0,
        argmax: d0.values[0].min(d1.values[0]),
    };
    while i < n0 || j < n1 {
        let t = match (d0.values.get(i), d1.values.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < n0 && d0.values[i] <= t {
            i += 1;
        }
        while j < n1 && d1.values[j] <= t {
            j += 1;
        }
        let f0 = if i == 0 { 0.0 } else { d0.cumulative[i - 1] };
        let f1 = if j == 0 { 0.0 } else { d1.cumulative[j - 1] };
        let gap = (f0 - f1).abs();
        if gap > best.distance {
            best = KsStatistic {
                distance: gap,
                argmax: t,
            };
        }
    }
    best
}

/// Sup-norm distance between the two step CDFs.
pub fn ks_distance(d0: &EmpiricalDistribution, d1: &EmpiricalDistribution) -> f64 {
    ks_statistic(d0, d1).distance
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn normal_draws(seed: u64, n: usize, mean: f64, sd: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(mean, sd).unwrap();
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    }

    fn dist(xs: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(xs).unwrap()
    }

    // Independent oracle: midpoint rule over a uniform p-grid.
    fn riemann_w1(d0: &EmpiricalDistribution, d1: &EmpiricalDistribution, n: usize) -> f64 {
        (0..n)
            .map(|k| {
                let p = (k as f64 + 0.5) / n as f64;
                (d0.quantile(p) - d1.quantile(p)).abs()
            })
            .sum::<f64>()
            / n as f64
    }

    // Standard normal CDF by composite Simpson integration of the density.
    fn phi_cdf(x: f64) -> f64 {
        let lo = -12.0;
        let n = 20_000;
        let h = (x - lo) / n as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = pdf(lo) + pdf(x);
        for k in 1..n {
            let t = lo + k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * pdf(t);
        }
        s * h / 3.0
    }

    #[test]
    fn build_sorts_and_normalizes() {
        let d = dist(&[1.0, 3.0, 2.0]);
        assert_eq!(d.values(), &[1.0, 2.0, 3.0]);
        for w in d.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((d.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_quantiles() {
        let d = dist(&[5.0]);
        for p in [1e-9, 0.25, 0.5, 0.999, 1.0] {
            assert_eq!(d.quantile(p), 5.0);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(EmpiricalDistribution::new(&[]), Err(Error::EmptySample)));
        assert!(matches!(
            EmpiricalDistribution::new(&[1.0, f64::NAN]),
            Err(Error::NonFiniteSample { index: 1 })
        ));
        assert!(matches!(
            EmpiricalDistribution::with_weights(&[1.0, 2.0], &[0.5, -0.1]),
            Err(Error::InvalidWeight { index: 1 })
        ));
        assert!(matches!(
            EmpiricalDistribution::with_weights(&[1.0, 2.0], &[0.5]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn median_of_normal_draws_matches_sample_median() {
        let xs = normal_draws(7, 10_000, 0.0, 1.0);
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        // inf-convention median of an even-sized sample is the lower middle
        let oracle = sorted[sorted.len() / 2 - 1];
        let q = dist(&xs).quantile(0.5);
        assert_eq!(q, oracle);
        assert!(q.abs() < 0.05);
    }

    #[test]
    fn quantile_is_generalized_inverse() {
        let d = dist(&[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(d.quantile(0.25), 1.0);
        assert_eq!(d.quantile(0.26), 2.0);
        assert_eq!(d.quantile(0.75), 2.0);
        assert_eq!(d.quantile(0.76), 4.0);
        assert_eq!(d.quantile(0.0), 1.0);
        assert_eq!(d.cdf(1.999), 0.25);
        assert_eq!(d.cdf(2.0), 0.75);
        assert_eq!(d.cdf(10.0), 1.0);
    }

    #[test]
    fn point_masses() {
        let eps = 0.1;
        let a = dist(&[eps]);
        let b = dist(&[-eps]);
        assert!((wasserstein1(&a, &b) - 0.2).abs() < 1e-15);
        assert_eq!(ks_distance(&a, &b), 1.0);
        let same = dist(&[1.0, 2.0, 3.0]);
        assert_eq!(wasserstein1(&same, &same.clone()), 0.0);
        assert_eq!(ks_distance(&same, &same.clone()), 0.0);
    }

    #[test]
    fn signed_point_mass_transport() {
        let one = dist(&[1.0]);
        let zero = dist(&[0.0]);
        let s = wasserstein1_signed(&one, &zero, Favorable::Up);
        assert_eq!((s.total, s.positive_part, s.negative_part), (1.0, 1.0, 0.0));
        let s = wasserstein1_signed(&zero, &one, Favorable::Up);
        assert_eq!((s.total, s.positive_part, s.negative_part), (1.0, 0.0, 1.0));
    }

    #[test]
    fn gaussian_shift_distance() {
        let a = normal_draws(11, 50_000, 5.0, 1.0);
        let b = normal_draws(12, 50_000, 5.5, 1.0);
        let w = wasserstein1(&dist(&a), &dist(&b));
        // equal sizes: mean absolute difference of order statistics
        let mut sa = a.clone();
        let mut sb = b.clone();
        sa.sort_by(f64::total_cmp);
        sb.sort_by(f64::total_cmp);
        let oracle = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / sa.len() as f64;
        assert!((w - oracle).abs() < 1e-9, "{w} vs {oracle}");
        assert!((w - 0.5).abs() <= 0.02, "{w}");
    }

    #[test]
    fn crossing_cdfs_split_evenly() {
        let a = normal_draws(21, 50_000, 0.0, 2.0);
        let b = normal_draws(22, 50_000, 0.0, 1.0);
        let s = wasserstein1_signed(&dist(&a), &dist(&b), Favorable::Up);
        let rel = (s.positive_part - s.negative_part).abs() / s.positive_part.max(s.negative_part);
        assert!(rel < 0.05, "{s:?}");
        let oracle = riemann_w1(&dist(&a), &dist(&b), 200_000);
        assert!((s.total - oracle).abs() < 1e-3 * s.total);
    }

    #[test]
    fn ks_of_shifted_normals() {
        let a = normal_draws(31, 50_000, 0.0, 1.0);
        let b = normal_draws(32, 50_000, 0.5, 1.0);
        // oracle: max over a grid of |Φ(x) − Φ(x − 0.5)|
        let oracle = (0..=400)
            .map(|k| -2.0 + k as f64 * 0.01)
            .map(|x| (phi_cdf(x) - phi_cdf(x - 0.5)).abs())
            .fold(0.0, f64::max);
        assert!((oracle - 0.197).abs() < 1e-3);
        let ks = ks_distance(&dist(&a), &dist(&b));
        assert!((ks - oracle).abs() < 0.02, "{ks} vs {oracle}");
    }

    #[test]
    fn ks_argmax_matches_exhaustive_scan() {
        let a = normal_draws(41, 300, 0.0, 1.0);
        let b = normal_draws(42, 200, 0.3, 1.5);
        let (da, db) = (dist(&a), dist(&b));
        let ks = ks_statistic(&da, &db);
        let mut pooled: Vec<f64> = a.iter().chain(&b).copied().collect();
        pooled.sort_by(f64::total_cmp);
        let mut best = (0.0, f64::NAN);
        for &t in &pooled {
            let gap = (da.cdf(t) - db.cdf(t)).abs();
            if gap > best.0 {
                best = (gap, t);
            }
        }
        assert_eq!(ks.distance, best.0);
        assert_eq!(ks.argmax, best.1);
    }

    #[test]
    fn weighted_matches_replicated() {
        let d = EmpiricalDistribution::with_weights(&[0.0, 1.0, 3.0], &[1.0, 2.0, 1.0]).unwrap();
        let r = dist(&[0.0, 1.0, 1.0, 3.0]);
        let other = dist(&[0.5, 2.0]);
        assert!((wasserstein1(&d, &other) - wasserstein1(&r, &other)).abs() < 1e-14);
    }

    #[test]
    fn scaling_by_power_of_two_is_exact() {
        let a = normal_draws(51, 1000, 0.0, 1.0);
        let b = normal_draws(52, 700, 0.4, 2.0);
        let w = wasserstein1(&dist(&a), &dist(&b));
        let a2: Vec<f64> = a.iter().map(|x| 2.0 * x).collect();
        let b2: Vec<f64> = b.iter().map(|x| 2.0 * x).collect();
        assert_eq!(wasserstein1(&dist(&a2), &dist(&b2)), 2.0 * w);
    }

    fn sample_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0f64..50.0, 1..40)
    }

    proptest! {
        #[test]
        fn parts_recombine(a in sample_vec(), b in sample_vec()) {
            let s = wasserstein1_signed(&dist(&a), &dist(&b), Favorable::Down);
            prop_assert!((s.total - s.positive_part - s.negative_part).abs() <= 1e-10);
            let swapped = wasserstein1_signed(&dist(&b), &dist(&a), Favorable::Down);
            prop_assert!((s.positive_part - swapped.negative_part).abs() <= 1e-9);
        }

        #[test]
        fn symmetric_and_affine(a in sample_vec(), b in sample_vec(), c in 0.0f64..10.0, shift in -5.0f64..5.0) {
            let (da, db) = (dist(&a), dist(&b));
            let w = wasserstein1(&da, &db);
            prop_assert!((w - wasserstein1(&db, &da)).abs() <= 1e-10);
            let ta: Vec<f64> = a.iter().map(|x| c * x + shift).collect();
            let tb: Vec<f64> = b.iter().map(|x| c * x + shift).collect();
            let wt = wasserstein1(&dist(&ta), &dist(&tb));
            prop_assert!((wt - c * w).abs() <= 1e-9 * (1.0 + c * w));
        }

        #[test]
        fn triangle_inequality(a in sample_vec(), b in sample_vec(), c in sample_vec()) {
            let (da, db, dc) = (dist(&a), dist(&b), dist(&c));
            prop_assert!(wasserstein1(&da, &dc) <= wasserstein1(&da, &db) + wasserstein1(&db, &dc) + 1e-9);
        }

        #[test]
        fn matches_riemann_grid(a in sample_vec(), b in sample_vec()) {
            let (da, db) = (dist(&a), dist(&b));
            let range = da.max().max(db.max()) - da.min().min(db.min());
            let oracle = riemann_w1(&da, &db, 100_000);
            prop_assert!((wasserstein1(&da, &db) - oracle).abs() <= 1e-3 * range.max(1e-12));
        }

        #[test]
        fn ks_invariant_under_increasing_maps(a in sample_vec(), b in sample_vec()) {
            let ks = ks_distance(&dist(&a), &dist(&b));
            let f = |x: &f64| (x / 10.0).exp() + x.powi(3);
            let ta: Vec<f64> = a.iter().map(f).collect();
            let tb: Vec<f64> = b.iter().map(f).collect();
            prop_assert!((ks - ks_distance(&dist(&ta), &dist(&tb))).abs() <= 1e-12);
        }

        #[test]
        fn zero_only_for_identical_cdfs(a in sample_vec()) {
            let mut b = a.clone();
            b.reverse();
            prop_assert_eq!(wasserstein1(&dist(&a), &dist(&b)), 0.0);
            b.push(1000.0);
            prop_assert!(wasserstein1(&dist(&a), &dist(&b)) > 0.0);
        }
    }
}
