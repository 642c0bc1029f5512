//! The four synthetic data-generating models M1 to M4.
//!
//! Each row draws `G ~ Bernoulli(p)`, five predictors whose class-conditional
//! laws depend on `G`, and `Y ~ Bernoulli(f(X))` for a logistic response in
//! the predictor sum. Normal laws are written `N(mean, variance)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calibrate::sigmoid;
use crate::data::Dataset;
use crate::empirical::Favorable;
use crate::error::{Error, Result};

const MU: f64 = 5.0;
const M4_S: f64 = 1.6;
const M4_SKEW_SCALE: f64 = 2.4;
const M4_SKEW_OFFSET: f64 = 1.5;
const M4_Z2_SHAPE: f64 = 8.0;
const M4_Z4_SHAPE: f64 = -1.0;
const MAX_CLASS_REDRAWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SyntheticModel {
    M1,
    M2,
    M3,
    M4,
}

impl SyntheticModel {
    pub const ALL: [SyntheticModel; 4] = [Self::M1, Self::M2, Self::M3, Self::M4];

    pub fn n_features(self) -> usize {
        5
    }

    /// Class shift vector `a`: the `G = 0` mean is `mu - a_i`.
    pub fn shifts(self) -> Option<[f64; 5]> {
        match self {
            Self::M1 => Some([10.0 / 20.0, -4.0 / 20.0, 16.0 / 20.0, 1.0 / 20.0, -3.0 / 20.0]),
            Self::M2 => Some([0.25, 0.10, 0.40, -0.025, 0.075]),
            Self::M3 => Some([0.25, 0.10, 0.40, 0.025, 0.075]),
            Self::M4 => None,
        }
    }

    /// Direction of the favorable outcome for the preset experiments: a low
    /// default probability is the favorable outcome.
    pub fn favorable(self) -> Favorable {
        Favorable::Down
    }

    /// The true response `P(Y = 1 | X = x)`.
    pub fn response(self, x: &[f64]) -> f64 {
        let sum: f64 = x.iter().sum();
        match self {
            Self::M4 => sigmoid(1.5 * (sum - 24.0)),
            _ => sigmoid(2.0 * (sum - 24.5)),
        }
    }

    fn variances(self, g: f64) -> [f64; 5] {
        match self {
            Self::M1 => [0.5 + g, 1.0, 1.0, 1.0 - 0.5 * g, 1.0 - 0.75 * g],
            Self::M2 => [0.5 + 0.75 * g, 1.0, 1.0, 1.0 - 0.75 * g, 1.0],
            Self::M3 => [1.0; 5],
            Self::M4 => unreachable!("M4 is not a shifted-normal model"),
        }
    }

    fn sample_row<R: Rng + ?Sized>(self, g: u8, rng: &mut R, out: &mut [f64]) {
        let gf = f64::from(g);
        let Some(a) = self.shifts() else {
            return sample_m4(gf, rng, out);
        };
        let var = self.variances(gf);
        for ((o, ai), v) in out.iter_mut().zip(a).zip(var) {
            *o = normal(rng, MU - ai * (1.0 - gf), v);
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, variance: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + variance.sqrt() * z
}

/// Skew-normal draw with location `xi`, scale `omega` and shape `alpha`,
/// density `(2/omega) phi((x - xi)/omega) Phi(alpha (x - xi)/omega)`.
pub fn skew_normal<R: Rng + ?Sized>(rng: &mut R, xi: f64, omega: f64, alpha: f64) -> f64 {
    let delta = alpha / (1.0 + alpha * alpha).sqrt();
    let u0: f64 = rng.sample(StandardNormal);
    let v: f64 = rng.sample(StandardNormal);
    xi + omega * (delta * u0.abs() + (1.0 - delta * delta).sqrt() * v)
}

/// Mean of the skew-normal law used by [`skew_normal`].
pub fn skew_normal_mean(xi: f64, omega: f64, alpha: f64) -> f64 {
    let delta = alpha / (1.0 + alpha * alpha).sqrt();
    xi + omega * delta * (2.0 / std::f64::consts::PI).sqrt()
}

// X1 and X3 follow the shared Z1 except in the tails of Z0 (resp. Z3), where
// members of the G = 0 class are replaced by the skewed Z2 (resp. Z4).
fn sample_m4<R: Rng + ?Sized>(g: f64, rng: &mut R, out: &mut [f64]) {
    let z0 = normal(rng, MU, 1.25);
    let z1 = normal(rng, MU, 2.0);
    let z3 = normal(rng, MU, 1.0);
    let z2 = skew_normal(rng, MU - M4_SKEW_OFFSET, M4_SKEW_SCALE, M4_Z2_SHAPE);
    let z4 = skew_normal(rng, MU + M4_SKEW_OFFSET, M4_SKEW_SCALE, M4_Z4_SHAPE);
    let tail = |z: f64| f64::from(u8::from(z > MU + M4_S)) + f64::from(u8::from(z < MU - M4_S));
    out[0] = z1 + (z2 - z1) * tail(z0) * (1.0 - g);
    out[1] = normal(rng, MU - 0.6 * (1.0 - g), 1.0);
    out[2] = z1 + (z4 - z1) * tail(z3) * (1.0 - g);
    out[3] = normal(rng, MU + 0.15 * (1.0 - g), 1.25 - 0.75 * g);
    out[4] = normal(rng, MU - 0.45 * (1.0 - g), 1.0);
}

impl fmt::Display for SyntheticModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::M1 => "M1",
            Self::M2 => "M2",
            Self::M3 => "M3",
            Self::M4 => "M4",
        };
        f.write_str(s)
    }
}

impl FromStr for SyntheticModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "M1" => Ok(Self::M1),
            "M2" => Ok(Self::M2),
            "M3" => Ok(Self::M3),
            "M4" => Ok(Self::M4),
            _ => Err(Error::UnknownModel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub model: SyntheticModel,
    pub n_rows: usize,
    /// Probability of `G = 1`.
    pub p_protected: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(model: SyntheticModel, n_rows: usize, seed: u64) -> Self {
        Self { model, n_rows, p_protected: 0.5, seed }
    }
}

/// Draws a dataset with columns `x1..x5`, `g` and `y`.
///
/// When `p_protected` lies strictly inside `(0, 1)` and there are at least two
/// rows, both classes of `G` are guaranteed to appear.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n_rows == 0 {
        return Err(Error::EmptySample);
    }
    if !(0.0..=1.0).contains(&spec.p_protected) {
        return Err(Error::InvalidParameter(format!("p_protected must lie in [0, 1], got {}", spec.p_protected)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_rows;
    let want_both = n >= 2 && spec.p_protected > 0.0 && spec.p_protected < 1.0;
    let mut g: Vec<u8> = Vec::new();
    for _ in 0..MAX_CLASS_REDRAWS {
        g = (0..n).map(|_| u8::from(rng.random_bool(spec.p_protected))).collect();
        if !want_both || g.iter().any(|&v| v != g[0]) {
            break;
        }
    }
    if want_both && g.iter().all(|&v| v == g[0]) {
        g[0] = 1 - g[0];
    }
    let p = spec.model.n_features();
    let mut x = vec![0.0; n * p];
    let mut y = Vec::with_capacity(n);
    for (row, &gi) in x.chunks_exact_mut(p).zip(&g) {
        spec.model.sample_row(gi, &mut rng, row);
        y.push(f64::from(u8::from(rng.random_bool(spec.model.response(row)))));
    }
    Dataset::new(x, p, g, y)
}
