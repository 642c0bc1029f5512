use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use fairpost::attribution::{
    basic_bias_explanations, ibe_table, select_impactful, shapley_bias_game, AttributionTable, GroupExplainer,
    ImpactList, SelectionRule, MAX_EXACT_GAME_PREDICTORS,
};
use fairpost::bias::{classifier_bias, model_bias, PartitionSpec};
use fairpost::calibrate::{auc, fit_calibration, CalibrationTarget};
use fairpost::explain::{default_background, marginal_shapley, pdp_all, ShapleyMode, MAX_EXACT_PREDICTORS};
use fairpost::learn::{generate, log_loss, train_gbm, train_logistic, GbmConfig, ModelBody, SyntheticModel, SyntheticSpec, TrainedModel};
use fairpost::mitigate::baseline::best_unpenalised_config;
use fairpost::mitigate::{run_algorithm1, run_hyperparam_baseline, Frontier, GbmBounds, SearchSpace, Splits, TransformSearch};
use fairpost::transform::{
    build_postprocessed, focal_point, CompressiveParams, FocalRule, PredictorTransform, Transform,
};
use fairpost::{Dataset, Model};

use crate::args::*;

/// Files written by a command and a JSON summary for its manifest.
pub struct Report {
    pub outputs: Vec<PathBuf>,
    pub summary: Value,
}

impl Report {
    fn new(out: &std::path::Path, summary: Value) -> Self {
        Self { outputs: vec![out.to_path_buf()], summary }
    }
}

pub fn run(command: &Command) -> Result<Report> {
    match command {
        Command::Generate(a) => generate_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Bias(a) => bias_cmd(a),
        Command::Explain(a) => explain_cmd(a),
        Command::Mitigate(a) => mitigate_cmd(a),
        Command::Curve(a) => curve_cmd(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::CompareBaseline(a) => baseline_cmd(a),
        Command::Replay(_) => bail!("replay is handled by the caller"),
    }
}

fn read_data(path: &std::path::Path) -> Result<Dataset> {
    Dataset::read_csv(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn read_model(path: &std::path::Path, data: &Dataset) -> Result<TrainedModel> {
    let model = TrainedModel::load_json(path).with_context(|| format!("reading model {}", path.display()))?;
    if model.n_features() != data.n_features() {
        return Err(fairpost::Error::LengthMismatch {
            what: "model predictors",
            expected: data.n_features(),
            found: model.n_features(),
        })
        .context("model and dataset disagree");
    }
    Ok(model)
}

fn labels_for<'a>(partition: &PartitionSpec, data: &'a Dataset) -> Option<&'a [f64]> {
    partition.needs_labels().then(|| data.y())
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        log::warn!("{w}");
    }
}

fn generate_cmd(a: &GenerateArgs) -> Result<Report> {
    let model: SyntheticModel = a.model.parse()?;
    let spec = SyntheticSpec { model, n_rows: a.n, p_protected: a.p_protected, seed: a.seed };
    let data = generate(&spec)?;
    data.write_csv(&a.out)?;
    let protected = data.g().iter().filter(|&&g| g == 1).count();
    Ok(Report::new(
        &a.out,
        json!({ "rows": data.n_rows(), "columns": data.names(), "protected_rows": protected, "favorable": model.favorable() }),
    ))
}

impl GbmArgs {
    fn config(&self) -> GbmConfig {
        GbmConfig {
            n_estimators: self.n_estimators,
            max_leaves: self.max_leaves,
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            min_samples_leaf: self.min_samples_leaf,
            l2: self.l2,
            ..GbmConfig::default()
        }
    }
}

fn train_cmd(a: &TrainArgs) -> Result<Report> {
    let data = read_data(&a.data)?;
    let body = match a.kind {
        ModelKind::Gbm => ModelBody::Gbm(train_gbm(&data, &a.gbm.config())?),
        ModelKind::Logistic => ModelBody::Logistic(train_logistic(&data)?),
    };
    let model = TrainedModel { favorable: a.favorable.into(), body };
    model.save_json(&a.out)?;
    let scores = model.predict(&data);
    let summary = json!({
        "rows": data.n_rows(),
        "train_log_loss": log_loss(data.y(), &scores),
        "train_auc": auc(&scores, data.y())?,
    });
    Ok(Report::new(&a.out, summary))
}

fn bias_cmd(a: &BiasArgs) -> Result<Report> {
    let data = read_data(&a.input.data)?;
    let model = read_model(&a.input.model_file, &data)?;
    let partition = a.input.partition.spec();
    let scores = model.predict(&data);
    let report = model_bias(&scores, data.g(), labels_for(&partition, &data), &partition, model.favorable)?;
    warn_all(&report.warnings);
    let classifier = a
        .thresholds
        .iter()
        .map(|&t| Ok(json!({ "threshold": t, "bias": classifier_bias(&scores, data.g(), t, model.favorable)? })))
        .collect::<Result<Vec<_>>>()?;
    let body = json!({ "model_bias": report, "partition": partition, "classifier_bias": classifier });
    std::fs::write(&a.out, serde_json::to_string_pretty(&body)?)?;
    Ok(Report::new(&a.out, json!({ "total": report.total, "positive": report.positive, "negative": report.negative })))
}

fn explain_cmd(a: &ExplainArgs) -> Result<Report> {
    let data = read_data(&a.input.data)?;
    let model = read_model(&a.input.model_file, &data)?;
    let partition = a.input.partition.spec();
    let fav = model.favorable;
    let y = labels_for(&partition, &data);
    let p = data.n_features();
    let mode = |max: usize| match a.permutations {
        None if p <= max => ShapleyMode::Exact,
        n => ShapleyMode::Sampled { n_permutations: n.unwrap_or(256), seed: a.seed },
    };
    let table: AttributionTable = match a.method {
        ExplainMethod::Pdp => {
            let out = pdp_all(&model, &data, &default_background(&data))?;
            basic_bias_explanations(&out, data.names(), data.g(), y, &partition, fav)?
        }
        ExplainMethod::Shapley => {
            let out = marginal_shapley(&model, &data, &default_background(&data), mode(MAX_EXACT_PREDICTORS))?;
            basic_bias_explanations(&out, data.names(), data.g(), y, &partition, fav)?
        }
        ExplainMethod::ShapleyGame => shapley_bias_game(
            &model,
            &data,
            &default_background(&data),
            GroupExplainer::default(),
            mode(MAX_EXACT_GAME_PREDICTORS),
            &partition,
            fav,
        )?,
        ExplainMethod::Ibe => ibe_table(&model, &data, a.anchors, a.seed, &partition, fav)?,
    };
    warn_all(&table.warnings);
    table.write_csv(std::fs::File::create(&a.out)?)?;
    let selection = select_impactful(&table, &SelectionRule { m_star: a.m_star, ..SelectionRule::default() })?;
    warn_all(&selection.warnings);
    let names = |idx: &[usize]| idx.iter().map(|&i| data.names()[i].clone()).collect::<Vec<_>>();
    Ok(Report::new(
        &a.out,
        json!({
            "approximate": table.approximate,
            "grand_coalition": table.grand_coalition,
            "selected": names(&selection.m),
            "n_plus": names(&selection.n_plus),
            "n_minus": names(&selection.n_minus),
            "selection": selection,
            "warnings": table.warnings,
        }),
    ))
}

/// Train, holdout and test datasets.
fn load_splits(s: &SplitArgs) -> Result<[Dataset; 3]> {
    let data = read_data(&s.data)?;
    match (&s.holdout, &s.test) {
        (Some(h), Some(t)) => Ok([data, read_data(h)?, read_data(t)?]),
        (None, None) => {
            if s.split.len() != 3 {
                bail!(fairpost::Error::InvalidParameter(format!(
                    "--split needs three fractions (train, holdout, test), got {}",
                    s.split.len()
                )));
            }
            let parts = data.split(&s.split, s.split_seed)?;
            let [train, holdout, test]: [Dataset; 3] = parts.try_into().expect("three fractions give three parts");
            Ok([train, holdout, test])
        }
        _ => bail!(fairpost::Error::InvalidParameter("--holdout and --test must be given together".into())),
    }
}

impl SearchArgs {
    fn space(&self) -> SearchSpace {
        SearchSpace {
            omegas: if self.omegas.is_empty() { SearchSpace::default_omegas() } else { self.omegas.clone() },
            n_prior: self.n_prior,
            n_bo: self.n_bo,
            seed: self.seed,
            surrogate: self.surrogate.into(),
        }
    }
}

fn predictor_indices(data: &Dataset, names: &[String]) -> Result<Vec<usize>> {
    Ok(names.iter().map(|n| data.feature_index(n)).collect::<fairpost::Result<_>>()?)
}

fn frontier_summary(frontier: &Frontier) -> Value {
    let best: Vec<Value> = frontier
        .best_by_omega
        .iter()
        .map(|b| {
            let p = &frontier.points[b.point];
            json!({ "omega": b.omega, "bias": p.bias, "loss": p.loss, "holdout_objective": b.holdout_objective, "gamma": p.gamma })
        })
        .collect();
    json!({
        "points": frontier.points.len(),
        "frontier_points": frontier.frontier_indices.len(),
        "reference": frontier.reference,
        "best_by_omega": best,
        "warnings": frontier.warnings,
    })
}

fn mitigate_cmd(a: &MitigateArgs) -> Result<Report> {
    let [train, holdout, test] = load_splits(&a.split)?;
    let model = read_model(&a.model_file, &train)?;
    let impact = ImpactList::fixed(&predictor_indices(&train, &a.predictors)?);
    let settings = TransformSearch {
        kind: a.transform.into(),
        a_bounds: (a.a_min, a.a_max),
        sigma_bounds: (a.sigma_min, a.sigma_max),
        focal_rule: a.focal.into(),
        focal_overrides: Vec::new(),
        focal_halfwidth: a.focal_halfwidth,
        calibration: a.calibration.into(),
        calibration_target: a.calibration_target.into(),
        partition: a.search.partition.spec(),
        favorable: model.favorable,
    };
    let splits = Splits { train: &train, holdout: &holdout, test: &test };
    let frontier = run_algorithm1(&model, splits, &impact, &settings, &a.search.space())?;
    warn_all(&frontier.warnings);
    frontier.write_csv_file(&a.out)?;
    Ok(Report::new(&a.out, frontier_summary(&frontier)))
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || fairpost::Error::InvalidParameter(format!("a-grid `{s}` (expected lo:hi, lo:hi:step or a list)"));
    let nums = |sep: char| s.split(sep).map(|t| t.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<Vec<_>, _>>();
    let grid = if s.contains(':') {
        let v = nums(':')?;
        let (lo, hi, step) = match v[..] {
            [lo, hi] => (lo, hi, 1.0),
            [lo, hi, step] => (lo, hi, step),
            _ => return Err(bad().into()),
        };
        if !(step > 0.0 && lo <= hi) {
            return Err(bad().into());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| lo + k as f64 * step).collect()
    } else {
        nums(',')?
    };
    if grid.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(fairpost::Error::InvalidParameter(format!("a-grid `{s}` must contain positive factors")).into());
    }
    Ok(grid)
}

fn curve_cmd(a: &CurveArgs) -> Result<Report> {
    let data = read_data(&a.input.data)?;
    let model = read_model(&a.input.model_file, &data)?;
    let partition = a.input.partition.spec();
    let y = labels_for(&partition, &data);
    let indices = predictor_indices(&data, &a.predictors)?;
    let grid = parse_grid(&a.a_grid)?;
    let rule: FocalRule = a.focal.into();
    let focals = indices.iter().map(|&i| focal_point(&data, i, rule)).collect::<fairpost::Result<Vec<_>>>()?;
    let impact = ImpactList::fixed(&indices);
    let base = model.predict(&data);
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["a", "total", "positive", "negative"])?;
    let mut warnings = Vec::new();
    for &factor in &grid {
        let params = CompressiveParams {
            transforms: indices
                .iter()
                .zip(&focals)
                .map(|(&i, &focal)| PredictorTransform {
                    predictor: data.names()[i].clone(),
                    index: i,
                    transform: Transform::Global { a: factor },
                    focal_rule: rule,
                    focal,
                })
                .collect(),
        };
        let post = build_postprocessed(&model, &impact, params)?;
        let raw = post.predict(&data);
        let scores = match a.calibration {
            None => raw,
            Some(method) => match fit_calibration(method.into(), CalibrationTarget::BaseScores, &raw, &base, data.y()) {
                Ok(fit) => fit.map.apply_all(&raw),
                Err(e @ fairpost::Error::CalibrationFailure(_)) => {
                    warnings.push(format!("a = {factor}: {e}; uncalibrated scores used"));
                    raw
                }
                Err(e) => return Err(e.into()),
            },
        };
        let r = model_bias(&scores, data.g(), y, &partition, model.favorable)?;
        w.write_record([factor, r.total, r.positive, r.negative].map(|v| v.to_string()))?;
    }
    w.flush()?;
    warn_all(&warnings);
    Ok(Report::new(&a.out, json!({ "grid": grid, "focals": focals, "warnings": warnings })))
}

fn calibrate_cmd(a: &CalibrateArgs) -> Result<Report> {
    let data = read_data(&a.input.data)?;
    let model = read_model(&a.input.model_file, &data)?;
    let partition = a.input.partition.spec();
    let text = std::fs::read_to_string(&a.params).with_context(|| format!("reading {}", a.params.display()))?;
    let params: CompressiveParams = serde_json::from_str(&text).context("parsing transform parameters")?;
    for t in &params.transforms {
        data.check_index(t.index)?;
    }
    let post = build_postprocessed(&model, &ImpactList::fixed(&params.indices()), params)?;
    let fit = fit_calibration(a.method.into(), a.target.into(), &post.predict(&data), &model.predict(&data), data.y())?;
    warn_all(&fit.warnings);
    let eval = match &a.eval {
        Some(p) => read_data(p)?,
        None => data,
    };
    let base = model.predict(&eval);
    let raw = post.predict(&eval);
    let calibrated = fit.map.apply_all(&raw);
    let metrics = |s: &[f64]| -> Result<Value> {
        let bias = model_bias(s, eval.g(), labels_for(&partition, &eval), &partition, model.favorable)?;
        Ok(json!({ "bias": bias.total, "bias_positive": bias.positive, "bias_negative": bias.negative,
                   "log_loss": log_loss(eval.y(), s), "auc": auc(s, eval.y())? }))
    };
    let body = json!({
        "calibration": fit,
        "base": metrics(&base)?,
        "uncalibrated": metrics(&raw)?,
        "calibrated": metrics(&calibrated)?,
    });
    std::fs::write(&a.out, serde_json::to_string_pretty(&body)?)?;
    Ok(Report::new(&a.out, json!({ "calibrated": body["calibrated"], "uncalibrated": body["uncalibrated"] })))
}

fn pair<T: Copy>(name: &str, v: &[T]) -> Result<(T, T)> {
    match v {
        [lo, hi] => Ok((*lo, *hi)),
        [x] => Ok((*x, *x)),
        _ => bail!(fairpost::Error::InvalidParameter(format!("--{name} takes `lo,hi` or a single value"))),
    }
}

fn baseline_cmd(a: &BaselineArgs) -> Result<Report> {
    let [train, holdout, test] = load_splits(&a.split)?;
    let bounds = GbmBounds {
        n_estimators: pair("n-estimators", &a.n_estimators)?,
        max_leaves: pair("max-leaves", &a.max_leaves)?,
        max_depth: pair("max-depth", &a.max_depth)?,
        learning_rate: pair("learning-rate", &a.learning_rate)?,
    };
    let base = GbmConfig::default();
    let splits = Splits { train: &train, holdout: &holdout, test: &test };
    let frontier =
        run_hyperparam_baseline(splits, bounds, base, &a.search.partition.spec(), a.favorable.into(), &a.search.space())?;
    warn_all(&frontier.warnings);
    frontier.write_csv_file(&a.out)?;
    let mut summary = frontier_summary(&frontier);
    summary["best_unpenalised_config"] = serde_json::to_value(best_unpenalised_config(&frontier, &bounds, &base))?;
    Ok(Report::new(&a.out, summary))
}
