//! Bias/loss frontier reconstruction over a parametrised model family.
//!
//! The search draws `n_prior` parameter vectors uniformly from a box,
//! records holdout loss and bias for each, then, for every penalty `omega`,
//! runs `n_bo` surrogate-guided steps minimising `loss + omega * bias` on the
//! holdout. Every visited vector is finally scored on the test split and the
//! nondominated set is extracted there.

pub mod baseline;
pub mod family;
pub mod pareto;
pub mod surrogate;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use baseline::{run_hyperparam_baseline, GbmBounds, GbmFamily};
pub use family::{objective, run_algorithm1, Objective, Splits, TransformFamily, TransformSearch};
pub use pareto::{convex_envelope, pareto_indices};
pub use surrogate::{GpEi, Surrogate, SurrogateKind, Tpe};

/// Loss and total bias of one model on one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub loss: f64,
    pub bias: f64,
}

/// Holdout and test metrics of one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEval {
    pub holdout: Metrics,
    pub test: Metrics,
    /// `false` when the calibration step failed and the raw scores were used.
    pub calibrated: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBound {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl ParamBound {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), lo, hi }
    }

    fn scale(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }

    fn unscale(&self, v: f64) -> f64 {
        if self.hi > self.lo {
            (v - self.lo) / (self.hi - self.lo)
        } else {
            0.5
        }
    }
}

/// A family of candidate models indexed by a real parameter vector.
pub trait Family: Sync {
    fn bounds(&self) -> &[ParamBound];
    fn evaluate(&self, params: &[f64]) -> Result<PointEval>;
    /// JSON description of the model behind `params`.
    fn describe(&self, params: &[f64]) -> serde_json::Value;
    /// Metrics of the unmodified reference model, if the family has one.
    fn reference(&self) -> Option<PointEval> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub omegas: Vec<f64>,
    pub n_prior: usize,
    pub n_bo: usize,
    pub seed: u64,
    #[serde(default)]
    pub surrogate: SurrogateKind,
}

impl SearchSpace {
    /// `omega_j = 2 j / 20` for `j = 0..=20`.
    pub fn default_omegas() -> Vec<f64> {
        (0..=20).map(|j| 2.0 * j as f64 / 20.0).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_prior == 0 {
            return Err(Error::InvalidParameter("n_prior must be at least 1".into()));
        }
        if self.omegas.is_empty() && self.n_bo > 0 {
            return Err(Error::InvalidParameter("at least one omega is needed for Bayesian steps".into()));
        }
        if let Some(w) = self.omegas.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidParameter(format!("omega must be finite and nonnegative, got {w}")));
        }
        Ok(())
    }
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self { omegas: Self::default_omegas(), n_prior: 400, n_bo: 50, seed: 0, surrogate: SurrogateKind::Tpe }
    }
}

fn validate_bounds(bounds: &[ParamBound]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::EmptySearchSpace("the family has no parameters".into()));
    }
    for b in bounds {
        if !(b.lo.is_finite() && b.hi.is_finite() && b.lo <= b.hi) {
            return Err(Error::EmptySearchSpace(format!("bound of {} is [{}, {}]", b.name, b.lo, b.hi)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSource {
    Prior,
    Bayes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatedOn {
    Holdout,
    Test,
}

/// One evaluated parameter vector. `bias` and `loss` refer to `evaluated_on`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub params: Vec<f64>,
    pub gamma: serde_json::Value,
    pub source: PointSource,
    /// Penalty of the Bayesian loop that first proposed the point.
    pub omega: Option<f64>,
    pub bias: f64,
    pub loss: f64,
    pub evaluated_on: EvaluatedOn,
    pub holdout: Metrics,
    pub calibrated: bool,
}

/// The point with the smallest holdout objective for one penalty, among the
/// prior draws and that penalty's own Bayesian steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaBest {
    pub omega: f64,
    pub point: usize,
    pub holdout_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub points: Vec<FrontierPoint>,
    /// Nondominated points on the test split, by increasing bias.
    pub frontier_indices: Vec<usize>,
    /// Vertices of the lower-left convex envelope of the frontier.
    pub envelope_indices: Vec<usize>,
    pub best_by_omega: Vec<OmegaBest>,
    pub reference: Option<PointEval>,
    pub warnings: Vec<String>,
}

impl Frontier {
    pub const CSV_HEADER: [&'static str; 5] = ["omega", "bias", "loss", "dominated_flag", "gamma_json"];

    pub fn coordinates(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.bias, p.loss)).collect()
    }

    pub fn prior_coordinates(&self) -> Vec<(f64, f64)> {
        self.points.iter().filter(|p| p.source == PointSource::Prior).map(|p| (p.bias, p.loss)).collect()
    }

    pub fn frontier_points(&self) -> impl Iterator<Item = &FrontierPoint> {
        self.frontier_indices.iter().map(|&i| &self.points[i])
    }

    pub fn best_for_omega(&self, omega: f64) -> Option<&FrontierPoint> {
        self.best_by_omega.iter().find(|b| b.omega == omega).map(|b| &self.points[b.point])
    }

    /// Smallest test loss among evaluated points with test bias at most `bias`.
    pub fn loss_at_bias(&self, bias: f64) -> Option<f64> {
        pareto::loss_at_bias(&self.coordinates(), bias)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::CSV_HEADER)?;
        let mut on_front = vec![false; self.points.len()];
        self.frontier_indices.iter().for_each(|&i| on_front[i] = true);
        for (p, front) in self.points.iter().zip(on_front) {
            w.write_record([
                p.omega.map(|o| o.to_string()).unwrap_or_default(),
                p.bias.to_string(),
                p.loss.to_string(),
                u8::from(!front).to_string(),
                serde_json::to_string(&p.gamma)?,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
    }
}

fn key(params: &[f64]) -> Vec<u64> {
    params.iter().map(|v| v.to_bits()).collect()
}

struct Visit {
    params: Vec<f64>,
    eval: PointEval,
}

/// Evaluates `params`, turning numerical failures into a skipped point.
fn try_evaluate(family: &dyn Family, params: &[f64], warnings: &mut Vec<String>) -> Result<Option<PointEval>> {
    match family.evaluate(params) {
        Ok(e) => Ok(Some(e)),
        Err(e) if e.is_numerical() => {
            warnings.push(format!("evaluation at {params:?} failed and was skipped: {e}"));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Runs the prior-sampling plus per-penalty surrogate search on `family`.
pub fn search(family: &dyn Family, space: &SearchSpace) -> Result<Frontier> {
    space.validate()?;
    let bounds = family.bounds().to_vec();
    validate_bounds(&bounds)?;
    let dim = bounds.len();
    let to_params = |u: &[f64]| -> Vec<f64> { u.iter().zip(&bounds).map(|(&v, b)| b.scale(v)).collect() };
    let to_unit = |p: &[f64]| -> Vec<f64> { p.iter().zip(&bounds).map(|(&v, b)| b.unscale(v)).collect() };

    let mut prior_rng = ChaCha8Rng::seed_from_u64(space.seed);
    let prior_params: Vec<Vec<f64>> = (0..space.n_prior)
        .map(|_| to_params(&(0..dim).map(|_| prior_rng.random::<f64>()).collect::<Vec<_>>()))
        .collect();
    let prior_evals: Vec<(Result<Option<PointEval>>, Vec<String>)> = prior_params
        .par_iter()
        .map(|p| {
            let mut w = Vec::new();
            (try_evaluate(family, p, &mut w), w)
        })
        .collect();

    let mut warnings = Vec::new();
    let mut visits: Vec<Visit> = Vec::new();
    let mut sources: Vec<(PointSource, Option<f64>)> = Vec::new();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut prior_ids: Vec<usize> = Vec::new();
    for (params, (res, w)) in prior_params.into_iter().zip(prior_evals) {
        warnings.extend(w);
        let Some(eval) = res? else { continue };
        let id = *index.entry(key(&params)).or_insert_with(|| {
            visits.push(Visit { params, eval });
            sources.push((PointSource::Prior, None));
            visits.len() - 1
        });
        prior_ids.push(id);
    }
    if prior_ids.is_empty() {
        return Err(Error::EmptySearchSpace("every prior evaluation failed".into()));
    }

    let surrogate = space.surrogate.build();
    let prior_history: Vec<(Vec<f64>, Metrics)> =
        prior_ids.iter().map(|&i| (to_unit(&visits[i].params), visits[i].eval.holdout)).collect();

    // one independent Bayesian loop per penalty, each on its own random stream
    type Loop = (Vec<(Vec<f64>, PointEval)>, Vec<String>);
    let loops: Vec<Result<Loop>> = space
        .omegas
        .par_iter()
        .enumerate()
        .map(|(j, &omega)| -> Result<Loop> {
            let mut rng = ChaCha8Rng::seed_from_u64(space.seed);
            rng.set_stream(j as u64 + 1);
            let mut xs: Vec<Vec<f64>> = prior_history.iter().map(|(x, _)| x.clone()).collect();
            let mut ys: Vec<f64> = prior_history.iter().map(|(_, m)| m.loss + omega * m.bias).collect();
            let mut local: HashMap<Vec<u64>, PointEval> = HashMap::new();
            let mut out = Vec::new();
            let mut w = Vec::new();
            for _ in 0..space.n_bo {
                let u = match surrogate.propose(dim, &xs, &ys, &mut rng) {
                    Ok(u) => u,
                    Err(e) => {
                        w.push(format!("surrogate failed for omega {omega}, using a random proposal: {e}"));
                        surrogate::uniform_point(dim, &mut rng)
                    }
                };
                let params = to_params(&u);
                let k = key(&params);
                let eval = match local.get(&k) {
                    Some(e) => e.clone(),
                    None => match try_evaluate(family, &params, &mut w)? {
                        Some(e) => {
                            local.insert(k, e.clone());
                            out.push((params.clone(), e.clone()));
                            e
                        }
                        None => continue,
                    },
                };
                xs.push(to_unit(&params));
                ys.push(eval.holdout.loss + omega * eval.holdout.bias);
            }
            Ok((out, w))
        })
        .collect();

    let mut best_by_omega = Vec::with_capacity(space.omegas.len());
    for (&omega, res) in space.omegas.iter().zip(loops) {
        let (steps, w) = res?;
        warnings.extend(w);
        let mut ids = prior_ids.clone();
        for (params, eval) in steps {
            let id = *index.entry(key(&params)).or_insert_with(|| {
                visits.push(Visit { params, eval });
                sources.push((PointSource::Bayes, Some(omega)));
                visits.len() - 1
            });
            ids.push(id);
        }
        let objective = |i: usize| visits[i].eval.holdout.loss + omega * visits[i].eval.holdout.bias;
        let best = ids
            .iter()
            .copied()
            .min_by(|&a, &b| objective(a).total_cmp(&objective(b)).then(a.cmp(&b)))
            .expect("prior points exist");
        best_by_omega.push(OmegaBest { omega, point: best, holdout_objective: objective(best) });
    }

    let points: Vec<FrontierPoint> = visits
        .into_iter()
        .zip(sources)
        .map(|(v, (source, omega))| {
            warnings.extend(v.eval.warnings.iter().cloned());
            FrontierPoint {
                gamma: family.describe(&v.params),
                params: v.params,
                source,
                omega,
                bias: v.eval.test.bias,
                loss: v.eval.test.loss,
                evaluated_on: EvaluatedOn::Test,
                holdout: v.eval.holdout,
                calibrated: v.eval.calibrated,
            }
        })
        .collect();
    warnings.sort();
    warnings.dedup();
    let coords: Vec<(f64, f64)> = points.iter().map(|p| (p.bias, p.loss)).collect();
    Ok(Frontier {
        frontier_indices: pareto_indices(&coords),
        envelope_indices: convex_envelope(&coords),
        points,
        best_by_omega,
        reference: family.reference(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-parameter toy family with closed-form loss and bias.
    struct Toy {
        bounds: Vec<ParamBound>,
    }

    impl Toy {
        fn new() -> Self {
            Self { bounds: vec![ParamBound::new("u", 0.0, 1.0), ParamBound::new("v", 0.0, 1.0)] }
        }
    }

    impl Family for Toy {
        fn bounds(&self) -> &[ParamBound] {
            &self.bounds
        }

        fn evaluate(&self, p: &[f64]) -> Result<PointEval> {
            let m = Metrics { loss: (1.0 - p[0]).powi(2) + 0.3 * p[1] * p[1], bias: p[0] * (1.0 + p[1]) };
            Ok(PointEval { holdout: m, test: m, calibrated: true, warnings: Vec::new() })
        }

        fn describe(&self, p: &[f64]) -> serde_json::Value {
            serde_json::json!({ "u": p[0], "v": p[1] })
        }
    }

    fn space(n_bo: usize) -> SearchSpace {
        SearchSpace { omegas: vec![0.0, 0.5, 1.0, 2.0], n_prior: 30, n_bo, seed: 7, surrogate: SurrogateKind::Tpe }
    }

    #[test]
    fn no_bayesian_steps_returns_the_prior_pareto_set() {
        let f = search(&Toy::new(), &space(0)).unwrap();
        assert_eq!(f.points.len(), 30);
        assert!(f.points.iter().all(|p| p.source == PointSource::Prior));
        assert_eq!(f.frontier_indices, pareto_indices(&f.prior_coordinates()));
    }

    #[test]
    fn search_weakly_dominates_prior_and_is_deterministic() {
        for kind in [SurrogateKind::Tpe, SurrogateKind::GpEi] {
            let s = SearchSpace { surrogate: kind, ..space(10) };
            let f = search(&Toy::new(), &s).unwrap();
            let front: Vec<(f64, f64)> = f.frontier_points().map(|p| (p.bias, p.loss)).collect();
            let prior = f.prior_coordinates();
            let prior_front: Vec<(f64, f64)> = pareto_indices(&prior).iter().map(|&i| prior[i]).collect();
            assert!(pareto::weakly_dominates_all(&front, &prior_front));
            assert_eq!(f, search(&Toy::new(), &s).unwrap());
        }
    }

    #[test]
    fn bayesian_steps_improve_the_penalised_objective() {
        let f0 = search(&Toy::new(), &space(0)).unwrap();
        let f = search(&Toy::new(), &space(25)).unwrap();
        for (a, b) in f.best_by_omega.iter().zip(&f0.best_by_omega) {
            assert!(a.holdout_objective <= b.holdout_objective);
        }
        assert!(f.best_by_omega.iter().zip(&f0.best_by_omega).any(|(a, b)| a.holdout_objective < b.holdout_objective));
    }

    #[test]
    fn degenerate_box_gives_one_point() {
        let toy = Toy { bounds: vec![ParamBound::new("u", 0.4, 0.4), ParamBound::new("v", 0.1, 0.1)] };
        let f = search(&toy, &space(5)).unwrap();
        assert_eq!(f.points.len(), 1);
        assert_eq!(f.frontier_indices, vec![0]);
    }

    #[test]
    fn invalid_spaces_are_rejected() {
        let toy = Toy { bounds: vec![ParamBound::new("u", 1.0, 0.0)] };
        assert!(matches!(search(&toy, &space(1)), Err(Error::EmptySearchSpace(_))));
        let s = SearchSpace { n_prior: 0, ..space(1) };
        assert!(search(&Toy::new(), &s).is_err());
        let s = SearchSpace { omegas: vec![-1.0], ..space(1) };
        assert!(search(&Toy::new(), &s).is_err());
    }

    #[test]
    fn csv_schema() {
        let f = search(&Toy::new(), &space(2)).unwrap();
        let s = f.to_csv_string().unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "omega,bias,loss,dominated_flag,gamma_json");
        assert_eq!(lines.count(), f.points.len());
        let front = s.lines().skip(1).filter(|l| l.split(',').nth(3) == Some("0")).count();
        assert_eq!(front, f.frontier_indices.len());
    }
}
