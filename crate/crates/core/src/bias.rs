//! Model bias under partition-weighted Wasserstein metrics.
//!
//! For a partition `A = {A_1, .., A_M}` of the rows with weights `w_m`, the
//! model bias is `Σ_m w_m · W1(f | A_m, G=0 ; f | A_m, G=1)`. The one-cell
//! partition gives a statistical-parity metric; splitting by the response
//! gives an equalized-odds metric.

use serde::{Deserialize, Serialize};

use crate::empirical::{
    wasserstein1_signed, EmpiricalDistribution, Favorable, SignedTransport,
};
use crate::error::{Error, Result};

/// Cells with fewer rows than this in either class get a warning.
pub const MIN_CLASS_ROWS: usize = 10;

/// An event over a dataset row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "cell", rename_all = "snake_case")]
pub enum Cell {
    All,
    Label { y: u8 },
}

impl Cell {
    pub fn name(&self) -> String {
        match self {
            Cell::All => "all".to_string(),
            Cell::Label { y } => format!("y={y}"),
        }
    }

    fn needs_labels(&self) -> bool {
        matches!(self, Cell::Label { .. })
    }
}

/// Disjoint cells with positive weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    cells: Vec<Cell>,
    weights: Vec<f64>,
}

impl PartitionSpec {
    pub fn new(cells: Vec<Cell>, weights: Vec<f64>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidPartition("no cells".into()));
        }
        if cells.len() != weights.len() {
            return Err(Error::LengthMismatch {
                what: "partition weights",
                expected: cells.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidPartition("weights must be positive".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidPartition(format!("weights sum to {sum}, not 1")));
        }
        if cells.contains(&Cell::All) && cells.len() > 1 {
            return Err(Error::InvalidPartition(
                "the all-rows cell overlaps every other cell".into(),
            ));
        }
        for (i, a) in cells.iter().enumerate() {
            if cells[..i].contains(a) {
                return Err(Error::InvalidPartition(format!("cell {} repeated", a.name())));
            }
        }
        Ok(Self { cells, weights })
    }

    /// One cell holding every row.
    pub fn statistical_parity() -> Self {
        Self { cells: vec![Cell::All], weights: vec![1.0] }
    }

    /// Cells `{Y=0}` and `{Y=1}` with weights `(1/2, 1/2)`.
    pub fn equalized_odds() -> Self {
        Self {
            cells: vec![Cell::Label { y: 0 }, Cell::Label { y: 1 }],
            weights: vec![0.5, 0.5],
        }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn needs_labels(&self) -> bool {
        self.cells.iter().any(Cell::needs_labels)
    }
}

/// Transport within one partition cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTransport {
    pub cell: String,
    pub weight: f64,
    pub n0: usize,
    pub n1: usize,
    #[serde(flatten)]
    pub transport: SignedTransport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub total: f64,
    pub positive: f64,
    pub negative: f64,
    pub net: f64,
    pub per_cell: Vec<CellTransport>,
    pub favorable: Favorable,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl BiasReport {
    pub fn signed(&self) -> SignedTransport {
        SignedTransport {
            total: self.total,
            positive_part: self.positive,
            negative_part: self.negative,
        }
    }
}

/// Row indices of each (cell, class) pair, reusable across many score vectors.
#[derive(Debug, Clone)]
pub struct PartitionIndex {
    cells: Vec<(Cell, f64, [Vec<usize>; 2])>,
    warnings: Vec<String>,
}

impl PartitionIndex {
    pub fn new(g: &[u8], y: Option<&[f64]>, partition: &PartitionSpec) -> Result<Self> {
        if let Some(y) = y {
            if y.len() != g.len() {
                return Err(Error::LengthMismatch { what: "labels", expected: g.len(), found: y.len() });
            }
        }
        let mut cells = Vec::with_capacity(partition.cells.len());
        let mut warnings = Vec::new();
        for (&cell, &w) in partition.cells.iter().zip(&partition.weights) {
            let mut rows: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
            match cell {
                Cell::All => {
                    for (i, &gi) in g.iter().enumerate() {
                        rows[usize::from(gi != 0)].push(i);
                    }
                }
                Cell::Label { y: label } => {
                    let y = y.ok_or_else(|| Error::LabelsRequired { cell: cell.name() })?;
                    for (i, (&gi, &yi)) in g.iter().zip(y).enumerate() {
                        if yi == f64::from(label) {
                            rows[usize::from(gi != 0)].push(i);
                        }
                    }
                }
            }
            if rows[0].is_empty() && rows[1].is_empty() {
                return Err(Error::EmptyCell { cell: cell.name() });
            }
            for class in 0..2u8 {
                if rows[class as usize].is_empty() {
                    return Err(Error::MissingClass { cell: cell.name(), class });
                }
            }
            if rows.iter().any(|r| r.len() < MIN_CLASS_ROWS) {
                warnings.push(format!(
                    "cell {} has only {} rows with G=0 and {} with G=1; its transport estimate is noisy",
                    cell.name(),
                    rows[0].len(),
                    rows[1].len()
                ));
            }
            cells.push((cell, w, rows));
        }
        Ok(Self { cells, warnings })
    }

    /// Partition-weighted signed transport of `values` between the classes.
    pub fn transport(&self, values: &[f64], favorable: Favorable) -> Result<SignedTransport> {
        Ok(self.report(values, favorable)?.signed())
    }

    pub fn report(&self, values: &[f64], favorable: Favorable) -> Result<BiasReport> {
        let mut acc = SignedTransport::default();
        let mut per_cell = Vec::with_capacity(self.cells.len());
        for (cell, w, rows) in &self.cells {
            let pick = |idx: &[usize]| idx.iter().map(|&i| values[i]).collect::<Vec<_>>();
            let d0 = EmpiricalDistribution::new(&pick(&rows[0]))?;
            let d1 = EmpiricalDistribution::new(&pick(&rows[1]))?;
            let t = wasserstein1_signed(&d0, &d1, favorable);
            acc.accumulate(t.scaled(*w));
            per_cell.push(CellTransport {
                cell: cell.name(),
                weight: *w,
                n0: rows[0].len(),
                n1: rows[1].len(),
                transport: t,
            });
        }
        Ok(BiasReport {
            total: acc.total,
            positive: acc.positive_part,
            negative: acc.negative_part,
            net: acc.positive_part - acc.negative_part,
            per_cell,
            favorable,
            warnings: self.warnings.clone(),
        })
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Partition-weighted W1 model bias of `scores` between `G=0` and `G=1`.
///
/// `y` is required when the partition conditions on the response.
pub fn model_bias(
    scores: &[f64],
    g: &[u8],
    y: Option<&[f64]>,
    partition: &PartitionSpec,
    favorable: Favorable,
) -> Result<BiasReport> {
    if scores.len() != g.len() {
        return Err(Error::LengthMismatch { what: "scores", expected: g.len(), found: scores.len() });
    }
    PartitionIndex::new(g, y, partition)?.report(scores, favorable)
}

fn class_distributions(scores: &[f64], g: &[u8]) -> Result<[EmpiricalDistribution; 2]> {
    if scores.len() != g.len() {
        return Err(Error::LengthMismatch { what: "scores", expected: g.len(), found: scores.len() });
    }
    let mut split: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (&s, &gi) in scores.iter().zip(g) {
        split[usize::from(gi != 0)].push(s);
    }
    for class in 0..2u8 {
        if split[class as usize].is_empty() {
            return Err(Error::MissingClass { cell: Cell::All.name(), class });
        }
    }
    let [a, b] = split;
    Ok([EmpiricalDistribution::new(&a)?, EmpiricalDistribution::new(&b)?])
}

/// Signed statistical-parity bias of the classifier `1{f > t}`:
/// `(F1(t) - F0(t)) · sign`.
pub fn classifier_bias(scores: &[f64], g: &[u8], threshold: f64, favorable: Favorable) -> Result<f64> {
    let [d0, d1] = class_distributions(scores, g)?;
    Ok((d1.cdf(threshold) - d0.cdf(threshold)) * favorable.sign())
}

/// Signed `p`-th quantile bias: `(F0^[-1](p) - F1^[-1](p)) · sign`.
pub fn quantile_bias(scores: &[f64], g: &[u8], p: f64, favorable: Favorable) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("quantile level {p} outside (0, 1)")));
    }
    let [d0, d1] = class_distributions(scores, g)?;
    Ok((d0.quantile(p) - d1.quantile(p)) * favorable.sign())
}

/// Fair up to `epsilon`: the total bias does not exceed it.
pub fn is_fair(report: &BiasReport, epsilon: f64) -> bool {
    report.total <= epsilon
}
