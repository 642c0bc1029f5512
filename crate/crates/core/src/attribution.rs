//! Bias explanations: how much each predictor contributes to the transport
//! between the two subpopulation score distributions.

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bias::{PartitionIndex, PartitionSpec};
use crate::data::Dataset;
use crate::empirical::{Favorable, SignedTransport};
use crate::error::{Error, Result};
use crate::explain::{marginal_game_table, marginal_shapley, ExplainerKind, ExplainerOutput, ShapleyMode};
use crate::model::Model;
use crate::shapley::{exact_shapley, sampled_shapley};

/// Largest predictor count for the exact Shapley bias game.
pub const MAX_EXACT_GAME_PREDICTORS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionKind {
    /// Transport of partial-dependence explanations.
    Pdp,
    /// Transport of marginal Shapley explanations.
    Shapley,
    /// Shapley values of the signed bias games.
    ShapleyGame,
    /// Expected individual bias explanations.
    Ibe,
}

impl AttributionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttributionKind::Pdp => "pdp",
            AttributionKind::Shapley => "shapley",
            AttributionKind::ShapleyGame => "shapley_game",
            AttributionKind::Ibe => "ibe",
        }
    }
}

/// Bias attribution of one predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub predictor: String,
    pub kind: AttributionKind,
    pub beta: f64,
    pub beta_pos: f64,
    pub beta_neg: f64,
    pub net: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bpp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bpm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bmp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bmm: Option<f64>,
}

impl Attribution {
    fn from_transport(predictor: &str, kind: AttributionKind, t: SignedTransport) -> Self {
        Self {
            predictor: predictor.to_string(),
            kind,
            beta: t.total,
            beta_pos: t.positive_part,
            beta_neg: t.negative_part,
            net: t.positive_part - t.negative_part,
            bpp: None,
            bpm: None,
            bmp: None,
            bmm: None,
        }
    }

    /// `bpp + bmp - bpm - bmm`, the predictor's share of the model bias in
    /// the superposition identity. `None` unless the atoms are present.
    pub fn superposition_term(&self) -> Option<f64> {
        Some(self.bpp? + self.bmp? - self.bpm? - self.bmm?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionTable {
    pub rows: Vec<Attribution>,
    pub favorable: Favorable,
    /// Set when any input was estimated by sampling.
    pub approximate: bool,
    /// Signed model bias given by the grand coalition of a bias game.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grand_coalition: Option<SignedTransport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub const CSV_HEADER: [&str; 10] = [
    "predictor", "kind", "beta", "beta_pos", "beta_neg", "net", "bpp", "bpm", "bmp", "bmm",
];

impl AttributionTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.predictor.clone(),
                r.kind.as_str().to_string(),
                r.beta.to_string(),
                r.beta_pos.to_string(),
                r.beta_neg.to_string(),
                r.net.to_string(),
                opt(r.bpp),
                opt(r.bpm),
                opt(r.bmp),
                opt(r.bmm),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Basic bias explanations: per-predictor partition-weighted W1 between the
/// explainer distributions of the two classes, with the signed split.
pub fn basic_bias_explanations(
    explainer: &ExplainerOutput,
    names: &[String],
    g: &[u8],
    y: Option<&[f64]>,
    partition: &PartitionSpec,
    favorable: Favorable,
) -> Result<AttributionTable> {
    if names.len() != explainer.n_predictors {
        return Err(Error::LengthMismatch {
            what: "predictor names",
            expected: explainer.n_predictors,
            found: names.len(),
        });
    }
    if g.len() != explainer.n_rows {
        return Err(Error::LengthMismatch { what: "g", expected: explainer.n_rows, found: g.len() });
    }
    if let Some(index) = explainer.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample { index });
    }
    let kind = match explainer.kind {
        ExplainerKind::Pdp => AttributionKind::Pdp,
        ExplainerKind::MarginalShapley => AttributionKind::Shapley,
        ExplainerKind::Ice => AttributionKind::Ibe,
    };
    let index = PartitionIndex::new(g, y, partition)?;
    let rows = (0..explainer.n_predictors)
        .map(|i| {
            let t = index.transport(&explainer.column(i), favorable)?;
            Ok(Attribution::from_transport(&names[i], kind, t))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AttributionTable {
        rows,
        favorable,
        approximate: explainer.approximate,
        grand_coalition: None,
        warnings: index.warnings().to_vec(),
    })
}

/// Group explainer used to value a coalition in the bias game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupExplainer {
    /// The marginal game value `v(S; r)`.
    GameValue,
    /// The sum of the coalition members' marginal Shapley values.
    #[default]
    ShapleySum,
}

/// Shapley bias explanations with the four sign atoms.
///
/// The coalition value is the signed partition-weighted transport of the
/// group explanation `E_S` between the classes; the empty coalition is worth
/// zero. Exact mode enumerates every coalition; sampled mode estimates both
/// the per-row Shapley values and the game's Shapley values by permutation
/// sampling, always with the Shapley-sum group explainer.
pub fn shapley_bias_game<M: Model + ?Sized>(
    model: &M,
    data: &Dataset,
    background: &Dataset,
    group: GroupExplainer,
    mode: ShapleyMode,
    partition: &PartitionSpec,
    favorable: Favorable,
) -> Result<AttributionTable> {
    let p = data.n_features();
    let n = data.n_rows();
    let index = PartitionIndex::new(data.g(), Some(data.y()), partition)?;
    let mut warnings = index.warnings().to_vec();
    let (phi_pos, phi_neg, grand, approximate) = match mode {
        ShapleyMode::Exact => {
            if p > MAX_EXACT_GAME_PREDICTORS {
                return Err(Error::TooManyPredictors { n: p, max: MAX_EXACT_GAME_PREDICTORS });
            }
            if background.n_rows() == 0 {
                return Err(Error::EmptySample);
            }
            let rows: Vec<&[f64]> = data.rows().collect();
            let tables: Vec<Vec<f64>> = rows.par_iter().map(|r| marginal_game_table(model, r, background)).collect();
            let explain: Vec<Vec<f64>> = match group {
                GroupExplainer::GameValue => tables,
                GroupExplainer::ShapleySum => tables
                    .par_iter()
                    .map(|t| {
                        let phi = exact_shapley(p, t);
                        (0..1usize << p)
                            .map(|mask| (0..p).filter(|i| mask >> i & 1 == 1).map(|i| phi[i]).sum())
                            .collect()
                    })
                    .collect(),
            };
            let games: Vec<SignedTransport> = (0..1usize << p)
                .into_par_iter()
                .map(|mask| {
                    if mask == 0 {
                        return Ok(SignedTransport::default());
                    }
                    let values: Vec<f64> = explain.iter().map(|e| e[mask]).collect();
                    index.transport(&values, favorable)
                })
                .collect::<Result<_>>()?;
            let vpos: Vec<f64> = games.iter().map(|t| t.positive_part).collect();
            let vneg: Vec<f64> = games.iter().map(|t| t.negative_part).collect();
            (exact_shapley(p, &vpos), exact_shapley(p, &vneg), games[(1 << p) - 1], false)
        }
        ShapleyMode::Sampled { n_permutations, seed } => {
            if group == GroupExplainer::GameValue {
                warnings.push("sampled bias game uses the Shapley-sum group explainer".into());
            }
            if p > 64 {
                return Err(Error::TooManyPredictors { n: p, max: 64 });
            }
            let phi = marginal_shapley(model, data, background, mode)?;
            let cache: RefCell<HashMap<u64, SignedTransport>> = RefCell::new(HashMap::new());
            let value = |mask: u64| -> SignedTransport {
                if let Some(t) = cache.borrow().get(&mask) {
                    return *t;
                }
                let t = if mask == 0 {
                    SignedTransport::default()
                } else {
                    let values: Vec<f64> = (0..n)
                        .map(|r| (0..p).filter(|i| mask >> i & 1 == 1).map(|i| phi.row(r)[i]).sum())
                        .collect();
                    // coalition sums of finite values stay finite, so the
                    // partition index cannot fail here
                    index.transport(&values, favorable).expect("finite coalition explanations")
                };
                cache.borrow_mut().insert(mask, t);
                t
            };
            let pairs = n_permutations.div_ceil(2);
            let game_seed = seed ^ 0x9e37_79b9_7f4a_7c15;
            let pos = sampled_shapley(p, pairs, &mut ChaCha8Rng::seed_from_u64(game_seed), |m| value(m).positive_part);
            let neg = sampled_shapley(p, pairs, &mut ChaCha8Rng::seed_from_u64(game_seed), |m| value(m).negative_part);
            let grand = value(if p == 64 { u64::MAX } else { (1u64 << p) - 1 });
            (pos, neg, grand, true)
        }
    };
    let rows = (0..p)
        .map(|i| {
            let (fp, fm) = (phi_pos[i], phi_neg[i]);
            let bpp = fp.max(0.0);
            let bpm = (-fp).max(0.0);
            let bmp = fm.max(0.0);
            let bmm = (-fm).max(0.0);
            let beta_pos = bpp + bmm;
            let beta_neg = bmp + bpm;
            Attribution {
                predictor: data.names()[i].clone(),
                kind: AttributionKind::ShapleyGame,
                beta: beta_pos + beta_neg,
                beta_pos,
                beta_neg,
                net: beta_pos - beta_neg,
                bpp: Some(bpp),
                bpm: Some(bpm),
                bmp: Some(bmp),
                bmm: Some(bmm),
            }
        })
        .collect();
    Ok(AttributionTable {
        rows,
        favorable,
        approximate,
        grand_coalition: Some(grand),
        warnings,
    })
}

/// Expected individual bias explanation of predictor `i`: the signed
/// transport of the ICE section `t -> f(t, x_{-i})` evaluated on the data,
/// averaged over `n_anchors` anchor rows drawn with `seed`.
pub fn expected_ibe<M: Model + ?Sized>(
    model: &M,
    data: &Dataset,
    i: usize,
    n_anchors: usize,
    seed: u64,
    partition: &PartitionSpec,
    favorable: Favorable,
) -> Result<SignedTransport> {
    data.check_index(i)?;
    let index = PartitionIndex::new(data.g(), Some(data.y()), partition)?;
    let anchors = draw_anchors(data.n_rows(), n_anchors, seed)?;
    ibe_with_anchors(model, data, i, &anchors, &index, favorable)
}

fn draw_anchors(n_rows: usize, n_anchors: usize, seed: u64) -> Result<Vec<usize>> {
    if n_anchors == 0 {
        return Err(Error::InvalidParameter("n_anchors must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(if n_anchors <= n_rows {
        sample(&mut rng, n_rows, n_anchors).into_vec()
    } else {
        (0..n_anchors).map(|_| rng.random_range(0..n_rows)).collect()
    })
}

fn ibe_with_anchors<M: Model + ?Sized>(
    model: &M,
    data: &Dataset,
    i: usize,
    anchors: &[usize],
    index: &PartitionIndex,
    favorable: Favorable,
) -> Result<SignedTransport> {
    let per_anchor: Vec<SignedTransport> = anchors
        .par_iter()
        .map(|&a| {
            let mut z = data.row(a).to_vec();
            let section: Vec<f64> = data
                .rows()
                .map(|r| {
                    z[i] = r[i];
                    model.predict_row(&z)
                })
                .collect();
            index.transport(&section, favorable)
        })
        .collect::<Result<_>>()?;
    let mut acc = SignedTransport::default();
    for t in &per_anchor {
        acc.accumulate(*t);
    }
    Ok(acc.scaled(1.0 / anchors.len() as f64))
}

/// Expected IBEs of every predictor, sharing one anchor draw.
pub fn ibe_table<M: Model + ?Sized>(
    model: &M,
    data: &Dataset,
    n_anchors: usize,
    seed: u64,
    partition: &PartitionSpec,
    favorable: Favorable,
) -> Result<AttributionTable> {
    let index = PartitionIndex::new(data.g(), Some(data.y()), partition)?;
    let anchors = draw_anchors(data.n_rows(), n_anchors, seed)?;
    let rows = (0..data.n_features())
        .map(|i| {
            let t = ibe_with_anchors(model, data, i, &anchors, &index, favorable)?;
            Ok(Attribution::from_transport(&data.names()[i], AttributionKind::Ibe, t))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AttributionTable {
        rows,
        favorable,
        approximate: true,
        grand_coalition: None,
        warnings: index.warnings().to_vec(),
    })
}

/// Thresholds and caps for [`select_impactful`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRule {
    /// Defaults to 5% of the summed attributions.
    pub eps_plus: Option<f64>,
    pub eps_minus: Option<f64>,
    /// Keep at most this many predictors from each of `N+` and `N-`.
    pub m_star: Option<usize>,
    /// `i` goes to `M+` when `beta_pos >= ratio * beta_neg`, to `M-` when
    /// `beta_neg >= ratio * beta_pos`, and to `M0` otherwise.
    pub ratio: f64,
}

impl Default for SelectionRule {
    fn default() -> Self {
        Self { eps_plus: None, eps_minus: None, m_star: None, ratio: 4.0 }
    }
}

/// Default relative threshold.
pub const DEFAULT_EPS_FRACTION: f64 = 0.05;

/// Predictor indices (0-based) selected for mitigation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactList {
    pub m: Vec<usize>,
    pub n_plus: Vec<usize>,
    pub n_minus: Vec<usize>,
    pub m_plus: Vec<usize>,
    pub m_minus: Vec<usize>,
    pub m_zero: Vec<usize>,
    pub eps_plus: f64,
    pub eps_minus: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ImpactList {
    /// An impact list holding exactly `indices`, all placed in `M0`.
    pub fn fixed(indices: &[usize]) -> Self {
        let mut m = indices.to_vec();
        m.sort_unstable();
        m.dedup();
        Self {
            n_plus: Vec::new(),
            n_minus: Vec::new(),
            m_plus: Vec::new(),
            m_minus: Vec::new(),
            m_zero: m.clone(),
            m,
            eps_plus: 0.0,
            eps_minus: 0.0,
            warnings: Vec::new(),
        }
    }
}

/// Selects the most bias-impactful predictors from an attribution table.
pub fn select_impactful(table: &AttributionTable, rule: &SelectionRule) -> Result<ImpactList> {
    let total: f64 = table.rows.iter().map(|r| r.beta).sum();
    let eps_plus = rule.eps_plus.unwrap_or(DEFAULT_EPS_FRACTION * total);
    let eps_minus = rule.eps_minus.unwrap_or(DEFAULT_EPS_FRACTION * total);
    if !(eps_plus >= 0.0 && eps_minus >= 0.0) {
        return Err(Error::InvalidParameter("selection thresholds must be nonnegative".into()));
    }
    if !(rule.ratio >= 1.0) {
        return Err(Error::InvalidParameter("selection ratio must be at least 1".into()));
    }
    let pick = |value: fn(&Attribution) -> f64, eps: f64| {
        let mut idx: Vec<usize> = (0..table.rows.len()).filter(|&i| value(&table.rows[i]) > eps).collect();
        if let Some(cap) = rule.m_star {
            idx.sort_by(|&a, &b| value(&table.rows[b]).total_cmp(&value(&table.rows[a])).then(a.cmp(&b)));
            idx.truncate(cap);
            idx.sort_unstable();
        }
        idx
    };
    let n_plus = pick(|r| r.beta_pos, eps_plus);
    let n_minus = pick(|r| r.beta_neg, eps_minus);
    let mut m: Vec<usize> = n_plus.iter().chain(&n_minus).copied().collect();
    m.sort_unstable();
    m.dedup();
    let (mut m_plus, mut m_minus, mut m_zero) = (Vec::new(), Vec::new(), Vec::new());
    for &i in &m {
        let r = &table.rows[i];
        if r.beta_pos >= rule.ratio * r.beta_neg {
            m_plus.push(i);
        } else if r.beta_neg >= rule.ratio * r.beta_pos {
            m_minus.push(i);
        } else {
            m_zero.push(i);
        }
    }
    let mut warnings = Vec::new();
    if m.is_empty() {
        warnings.push("no predictor exceeds the selection thresholds; the impact list is empty".into());
    }
    Ok(ImpactList { m, n_plus, n_minus, m_plus, m_minus, m_zero, eps_plus, eps_minus, warnings })
}
