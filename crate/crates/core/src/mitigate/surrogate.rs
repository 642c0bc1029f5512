//! Sequential proposal strategies on the unit cube.
//!
//! A surrogate sees every evaluated point (scaled to `[0, 1]^d`) with its
//! objective value and proposes the next point to evaluate. Lower is better.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};

pub trait Surrogate: Sync {
    fn propose(&self, dim: usize, xs: &[Vec<f64>], ys: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    #[default]
    Tpe,
    GpEi,
    /// Uniform proposals: Bayesian steps degenerate to random search.
    Random,
}

impl SurrogateKind {
    pub fn build(self) -> Box<dyn Surrogate> {
        match self {
            Self::Tpe => Box::new(Tpe::default()),
            Self::GpEi => Box::new(GpEi::default()),
            Self::Random => Box::new(RandomSearch),
        }
    }
}

impl std::str::FromStr for SurrogateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tpe" => Ok(Self::Tpe),
            "gp" | "gp_ei" | "gp-ei" => Ok(Self::GpEi),
            "random" => Ok(Self::Random),
            _ => Err(Error::InvalidParameter(format!("unknown surrogate {s:?}; expected tpe, gp or random"))),
        }
    }
}

pub fn uniform_point(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

pub struct RandomSearch;

impl Surrogate for RandomSearch {
    fn propose(&self, dim: usize, _xs: &[Vec<f64>], _ys: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        Ok(uniform_point(dim, rng))
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn check_history(xs: &[Vec<f64>], ys: &[f64], dim: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { what: "surrogate values", expected: xs.len(), found: ys.len() });
    }
    if let Some(x) = xs.iter().find(|x| x.len() != dim) {
        return Err(Error::LengthMismatch { what: "surrogate point", expected: dim, found: x.len() });
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Numerical("non-finite objective value in surrogate history".into()));
    }
    Ok(())
}

/// Tree-structured Parzen estimator.
///
/// The history is split at the `gamma` quantile of the objective into good
/// and bad points. Each set defines a product-kernel density of truncated
/// Gaussians on the unit cube mixed with the uniform prior. Candidates are
/// drawn from the good density and the one maximising `l(x) / g(x)` wins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tpe {
    pub gamma: f64,
    pub n_candidates: usize,
}

impl Default for Tpe {
    fn default() -> Self {
        Self { gamma: 0.25, n_candidates: 24 }
    }
}

struct Parzen {
    centers: Vec<Vec<f64>>,
    /// Per-component, per-dimension kernel widths.
    bandwidths: Vec<Vec<f64>>,
}

impl Parzen {
    /// Each kernel is as wide as the larger gap to its neighbours along
    /// every coordinate (the cube faces count as neighbours), clipped to
    /// `[1 / min(100, m + 1), 1]`.
    fn new(points: Vec<Vec<f64>>, dim: usize) -> Self {
        let m = points.len();
        let floor = 1.0 / (m + 1).min(100) as f64;
        let mut bandwidths = vec![vec![0.0; dim]; m];
        for d in 0..dim {
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| points[a][d].total_cmp(&points[b][d]).then(a.cmp(&b)));
            for (k, &i) in order.iter().enumerate() {
                let left = if k == 0 { 0.0 } else { points[order[k - 1]][d] };
                let right = if k + 1 == m { 1.0 } else { points[order[k + 1]][d] };
                let v = points[i][d];
                bandwidths[i][d] = (v - left).max(right - v).clamp(floor, 1.0);
            }
        }
        Self { centers: points, bandwidths }
    }

    fn weight(&self) -> f64 {
        1.0 / (self.centers.len() + 1) as f64
    }

    fn kernel(c: &[f64], h: &[f64], x: &[f64]) -> f64 {
        let mut k = 1.0;
        for ((&xi, &ci), &h) in x.iter().zip(c).zip(h) {
            let mass = std_normal_cdf((1.0 - ci) / h) - std_normal_cdf(-ci / h);
            k *= std_normal_pdf((xi - ci) / h) / (h * mass.max(1e-300));
        }
        k
    }

    fn log_pdf(&self, x: &[f64]) -> f64 {
        // the uniform prior has density one on the cube
        let kernels: f64 = self.centers.iter().zip(&self.bandwidths).map(|(c, h)| Self::kernel(c, h, x)).sum();
        ((1.0 + kernels) * self.weight()).ln()
    }

    fn sample(&self, dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let k = rng.random_range(0..=self.centers.len());
        if k == self.centers.len() {
            return uniform_point(dim, rng);
        }
        let (c, h) = (&self.centers[k], &self.bandwidths[k]);
        (0..dim)
            .map(|d| {
                for _ in 0..100 {
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    let v = c[d] + h[d] * z;
                    if (0.0..=1.0).contains(&v) {
                        return v;
                    }
                }
                c[d]
            })
            .collect()
    }
}

impl Surrogate for Tpe {
    fn propose(&self, dim: usize, xs: &[Vec<f64>], ys: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        check_history(xs, ys, dim)?;
        if xs.len() < 2 {
            return Ok(uniform_point(dim, rng));
        }
        let mut order: Vec<usize> = (0..ys.len()).collect();
        order.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]).then(a.cmp(&b)));
        let n_good = ((self.gamma * ys.len() as f64).ceil() as usize).clamp(1, ys.len() - 1);
        let good = Parzen::new(order[..n_good].iter().map(|&i| xs[i].clone()).collect(), dim);
        let bad = Parzen::new(order[n_good..].iter().map(|&i| xs[i].clone()).collect(), dim);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..self.n_candidates.max(1) {
            let c = good.sample(dim, rng);
            let score = good.log_pdf(&c) - bad.log_pdf(&c);
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, c));
            }
        }
        Ok(best.expect("at least one candidate").1)
    }
}

/// Gaussian-process regression with a Matérn 5/2 kernel and the expected
/// improvement acquisition.
///
/// Kernel length-scale and noise are picked from a small grid by marginal
/// likelihood; the acquisition is maximised over uniform candidates plus
/// perturbations of the incumbent.
#[derive(Debug, Clone, PartialEq)]
pub struct GpEi {
    pub length_scales: Vec<f64>,
    pub noise_levels: Vec<f64>,
    pub n_random: usize,
    pub n_local: usize,
    pub xi: f64,
}

impl Default for GpEi {
    fn default() -> Self {
        Self {
            length_scales: vec![0.1, 0.2, 0.4, 0.8],
            noise_levels: vec![1e-6, 1e-2],
            n_random: 1000,
            n_local: 100,
            xi: 0.01,
        }
    }
}

fn matern52(a: &[f64], b: &[f64], ell: f64) -> f64 {
    let r = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() / ell;
    let s = 5f64.sqrt() * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

struct GpFit {
    ell: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    alpha: nalgebra::DVector<f64>,
}

impl GpEi {
    fn fit(&self, xs: &[Vec<f64>], y: &nalgebra::DVector<f64>) -> Result<GpFit> {
        let n = xs.len();
        let mut best: Option<(f64, GpFit)> = None;
        for &ell in &self.length_scales {
            for &noise in &self.noise_levels {
                let k = nalgebra::DMatrix::from_fn(n, n, |i, j| {
                    matern52(&xs[i], &xs[j], ell) + if i == j { noise } else { 0.0 }
                });
                let Some(chol) = k.cholesky() else { continue };
                let alpha = chol.solve(y);
                let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
                let lml = -0.5 * y.dot(&alpha) - 0.5 * log_det;
                if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                    best = Some((lml, GpFit { ell, chol, alpha }));
                }
            }
        }
        best.map(|(_, f)| f).ok_or_else(|| Error::Numerical("Gaussian-process kernel matrix is not positive definite".into()))
    }
}

impl Surrogate for GpEi {
    fn propose(&self, dim: usize, xs: &[Vec<f64>], ys: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        check_history(xs, ys, dim)?;
        if xs.len() < 2 {
            return Ok(uniform_point(dim, rng));
        }
        let n = ys.len();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let sd = if sd > 0.0 { sd } else { 1.0 };
        let y = nalgebra::DVector::from_iterator(n, ys.iter().map(|v| (v - mean) / sd));
        let fit = self.fit(xs, &y)?;
        let incumbent = (0..n).min_by(|&a, &b| y[a].total_cmp(&y[b])).expect("nonempty history");
        let y_best = y[incumbent];
        let ei = |x: &[f64]| {
            let kx = nalgebra::DVector::from_iterator(n, xs.iter().map(|p| matern52(p, x, fit.ell)));
            let mu = kx.dot(&fit.alpha);
            let v = fit.chol.solve(&kx);
            let var = (1.0 - kx.dot(&v)).max(1e-12);
            let s = var.sqrt();
            let imp = y_best - mu - self.xi;
            let z = imp / s;
            imp * std_normal_cdf(z) + s * std_normal_pdf(z)
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut consider = |c: Vec<f64>| {
            let e = ei(&c);
            if best.as_ref().is_none_or(|(b, _)| e > *b) {
                best = Some((e, c));
            }
        };
        for _ in 0..self.n_random {
            consider(uniform_point(dim, rng));
        }
        for _ in 0..self.n_local {
            let c: Vec<f64> = xs[incumbent]
                .iter()
                .map(|&v| {
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    (v + 0.05 * z).clamp(0.0, 1.0)
                })
                .collect();
            consider(c);
        }
        Ok(best.map(|(_, c)| c).unwrap_or_else(|| uniform_point(dim, rng)))
    }
}
