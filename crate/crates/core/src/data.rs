//! Tabular datasets: predictors, protected attribute and binary response.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Row-major predictor matrix with a binary protected attribute `g` and a
/// response `y`.
///
/// The protected attribute is never passed to models; it is only used to
/// split score distributions when measuring bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    n_features: usize,
    names: Vec<String>,
    g: Vec<u8>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, n_features: usize, g: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        let names = (1..=n_features).map(|i| format!("x{i}")).collect();
        Self::with_names(x, names, g, y)
    }

    pub fn with_names(x: Vec<f64>, names: Vec<String>, g: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        let n_features = names.len();
        if n_features == 0 {
            return Err(Error::InvalidParameter("dataset needs at least one predictor".into()));
        }
        if !x.len().is_multiple_of(n_features) {
            return Err(Error::Format(format!(
                "{} values do not fill rows of {n_features} predictors",
                x.len()
            )));
        }
        let n = x.len() / n_features;
        if g.len() != n {
            return Err(Error::LengthMismatch { what: "g", expected: n, found: g.len() });
        }
        if y.len() != n {
            return Err(Error::LengthMismatch { what: "y", expected: n, found: y.len() });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        if let Some(&bad) = g.iter().find(|&&v| v > 1) {
            return Err(Error::Format(format!("protected attribute must be 0 or 1, found {bad}")));
        }
        if let Some(&bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::Format(format!("response is not finite: {bad}")));
        }
        Ok(Self { x, n_features, names, g, y })
    }

    /// Builds a dataset from predictor columns.
    pub fn from_columns(columns: &[Vec<f64>], g: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        let n = g.len();
        let mut x = Vec::with_capacity(n * columns.len());
        for r in 0..n {
            for c in columns {
                let v = c.get(r).ok_or(Error::LengthMismatch {
                    what: "predictor column",
                    expected: n,
                    found: c.len(),
                })?;
                x.push(*v);
            }
        }
        Self::new(x, columns.len(), g, y)
    }

    pub fn n_rows(&self) -> usize {
        self.g.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn g(&self) -> &[u8] {
        &self.g
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.x.chunks_exact(self.n_features)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn check_index(&self, j: usize) -> Result<()> {
        if j < self.n_features {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: j, len: self.n_features })
        }
    }

    /// Position of the predictor called `name`.
    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownPredictor(name.to_string()))
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut x = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            x.extend_from_slice(self.row(i));
        }
        Self {
            x,
            n_features: self.n_features,
            names: self.names.clone(),
            g: indices.iter().map(|&i| self.g[i]).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        }
    }

    /// Applies `f` to every value of predictor `j`.
    pub fn map_column(&self, j: usize, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for r in out.x.chunks_exact_mut(self.n_features) {
            r[j] = f(r[j]);
        }
        out
    }

    /// Shuffles rows with `seed` and cuts them into consecutive pieces whose
    /// sizes are proportional to `fractions`; the last piece takes the rest.
    pub fn split(&self, fractions: &[f64], seed: u64) -> Result<Vec<Self>> {
        if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::InvalidParameter("split fractions must be positive".into()));
        }
        let total: f64 = fractions.iter().sum();
        let n = self.n_rows();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut out = Vec::with_capacity(fractions.len());
        let mut start = 0;
        let mut acc = 0.0;
        for (k, f) in fractions.iter().enumerate() {
            acc += f;
            let end = if k + 1 == fractions.len() {
                n
            } else {
                ((acc / total) * n as f64).round() as usize
            };
            out.push(self.subset(&idx[start..end.max(start)]));
            start = end.max(start);
        }
        Ok(out)
    }

    /// A fixed-seed sample of at most `max_rows` rows (all rows if fewer).
    pub fn sample_rows(&self, max_rows: usize, seed: u64) -> Self {
        if self.n_rows() <= max_rows {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.n_rows()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        idx.truncate(max_rows);
        idx.sort_unstable();
        self.subset(&idx)
    }

    /// Reads a CSV whose last two columns are `g` and `y`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let k = headers.len();
        if k < 3 || &headers[k - 2] != "g" || &headers[k - 1] != "y" {
            return Err(Error::Format("header must end with columns g,y".into()));
        }
        let names: Vec<String> = headers.iter().take(k - 2).map(str::to_string).collect();
        let (mut x, mut g, mut y) = (Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {}: `{s}` is not a number", line + 1)))
            };
            for v in rec.iter().take(k - 2) {
                x.push(parse(v)?);
            }
            let gv = parse(&rec[k - 2])?;
            if gv != 0.0 && gv != 1.0 {
                return Err(Error::Format(format!("row {}: g must be 0 or 1", line + 1)));
            }
            g.push(gv as u8);
            y.push(parse(&rec[k - 1])?);
        }
        Self::with_names(x, names, g, y)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.extend(["g", "y"]);
        w.write_record(&header)?;
        for (i, row) in self.rows().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(self.g[i].to_string());
            rec.push(self.y[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            2,
            vec![0, 1, 0],
            vec![1.0, 0.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn accessors() {
        let d = toy();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert_eq!(d.column(1), vec![2.0, 4.0, 6.0]);
        assert_eq!(d.feature_index("x2").unwrap(), 1);
        assert!(matches!(d.feature_index("x9"), Err(Error::UnknownPredictor(_))));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Dataset::new(vec![1.0, 2.0, 3.0], 2, vec![0], vec![0.0]).is_err());
        assert!(Dataset::new(vec![1.0, 2.0], 2, vec![2], vec![0.0]).is_err());
        assert!(Dataset::new(vec![f64::NAN, 2.0], 2, vec![0], vec![0.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let d = toy().map_column(0, |v| v / 3.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        d.write_csv(&p).unwrap();
        let back = Dataset::read_csv(&p).unwrap();
        assert_eq!(back, d);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("x1,x2,g,y\n"));
    }

    #[test]
    fn split_partitions_rows() {
        let n = 101;
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let d = Dataset::new(x, 1, vec![0; n], vec![0.0; n]).unwrap();
        let parts = d.split(&[0.5, 0.25, 0.25], 3).unwrap();
        assert_eq!(parts.iter().map(Dataset::n_rows).sum::<usize>(), n);
        let mut all: Vec<f64> = parts.iter().flat_map(|p| p.column(0)).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, d.column(0));
        assert_eq!(parts, d.split(&[0.5, 0.25, 0.25], 3).unwrap());
    }
}
