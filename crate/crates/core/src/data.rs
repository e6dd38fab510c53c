//! Datasets, feature sets and CSV ingestion.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix, samples by features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Arity {
                what: "matrix buffer",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Arity {
                    what: "matrix row",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on 0; a zero-column matrix has no usable rows anyway
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Scales column `j` by `scale[j]`, broadcast over rows.
    pub fn scale_columns(&self, scale: &[f64]) -> Matrix {
        debug_assert_eq!(scale.len(), self.cols);
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.cols.max(1)) {
            for (v, s) in row.iter_mut().zip(scale) {
                *v *= s;
            }
        }
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

/// Covariates `x` (n by p) with targets `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(Error::contract("dataset needs at least one sample and one feature"));
        }
        if x.rows() != y.len() {
            return Err(Error::Arity {
                what: "target vector",
                expected: x.rows(),
                found: y.len(),
            });
        }
        if feature_names.len() != x.cols() {
            return Err(Error::Arity {
                what: "feature names",
                expected: x.cols(),
                found: feature_names.len(),
            });
        }
        if let Some(pos) = x.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "non-finite covariate at row {}, column {}",
                pos / x.cols(),
                pos % x.cols()
            )));
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite target at row {pos}")));
        }
        Ok(Self {
            x,
            y,
            feature_names,
        })
    }

    /// Builds a dataset with generated feature names `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let x = Matrix::from_rows(rows)?;
        let names = (0..x.cols()).map(|j| format!("x{j}")).collect();
        Self::new(x, y, names)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Same targets and names, new covariates of identical shape.
    pub fn with_x(&self, x: Matrix) -> Result<Self> {
        if x.rows() != self.n() || x.cols() != self.p() {
            return Err(Error::Arity {
                what: "replacement matrix",
                expected: self.n() * self.p(),
                found: x.rows() * x.cols(),
            });
        }
        Ok(Self {
            x,
            y: self.y.clone(),
            feature_names: self.feature_names.clone(),
        })
    }

    /// Same covariates, new targets.
    pub fn with_y(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(self.x.clone(), y, self.feature_names.clone())
    }

    /// Reads a headered CSV. `target` names the response column; the last
    /// column is used when it is `None`. Every other column is a feature, in
    /// file order.
    pub fn from_csv(path: impl AsRef<Path>, target: Option<&str>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file, target)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, target: Option<&str>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if headers.len() < 2 {
            return Err(Error::config("CSV needs a target column and at least one feature"));
        }
        let target_idx = match target {
            Some(name) => headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::config(format!("target column '{name}' not in header")))?,
            None => headers.len() - 1,
        };
        let feature_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != target_idx)
            .map(|(_, h)| h.clone())
            .collect();

        let mut data = Vec::new();
        let mut y = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            // header is line 1, first data row is row 1
            let row = r + 1;
            if record.len() != headers.len() {
                return Err(Error::Load {
                    row,
                    column: String::from("*"),
                    message: format!("expected {} fields, found {}", headers.len(), record.len()),
                });
            }
            for (j, cell) in record.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| Error::Load {
                    row,
                    column: headers[j].clone(),
                    message: format!("'{cell}' is not a decimal number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Load {
                        row,
                        column: headers[j].clone(),
                        message: format!("'{cell}' is not finite"),
                    });
                }
                if j == target_idx {
                    y.push(v);
                } else {
                    data.push(v);
                }
            }
        }
        let n = y.len();
        let x = Matrix::new(n, feature_names.len(), data)?;
        Self::new(x, y, feature_names)
    }

    /// Writes features then the target column `y`.
    pub fn to_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("y");
        wtr.write_record(&header)?;
        for (row, y) in self.x.iter_rows().zip(&self.y) {
            let mut rec: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
            rec.push(format_float(*y));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Shortest round-trip text for a float, switching to exponent notation for
/// very small or large magnitudes. Used by every CSV writer.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// Ordered set of distinct feature indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureSet(Vec<usize>);

impl FeatureSet {
    /// Indices are sorted; duplicates and empty sets are rejected.
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        if v.is_empty() {
            return Err(Error::contract("feature set must be non-empty"));
        }
        v.sort_unstable();
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::contract(format!("duplicate feature index in {v:?}")));
        }
        Ok(Self(v))
    }

    pub fn single(i: usize) -> Self {
        Self(vec![i])
    }

    pub fn pair(i: usize, j: usize) -> Result<Self> {
        Self::new([i, j])
    }

    /// Checks every index against the feature count `p`.
    pub fn validate(&self, p: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i >= p) {
            Some(&index) => Err(Error::FeatureIndex { index, p }),
            None => Ok(()),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// All unordered pairs over `0..p`, lexicographic.
    pub fn all_pairs(p: usize) -> Vec<FeatureSet> {
        let mut out = Vec::with_capacity(p * p.saturating_sub(1) / 2);
        for i in 0..p {
            for j in i + 1..p {
                out.push(FeatureSet(vec![i, j]));
            }
        }
        out
    }

    /// All `k`-subsets of `0..p`, lexicographic.
    pub fn all_of_size(p: usize, k: usize) -> Vec<FeatureSet> {
        fn rec(start: usize, p: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<FeatureSet>) {
            if cur.len() == k {
                out.push(FeatureSet(cur.clone()));
                return;
            }
            for i in start..p {
                cur.push(i);
                rec(i + 1, p, k, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        if k > 0 {
            rec(0, p, k, &mut Vec::with_capacity(k), &mut out);
        }
        out
    }

    /// Parses `"0,1,2"`.
    pub fn parse(s: &str) -> Result<Self> {
        let idx = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::config(format!("bad feature index '{t}' in '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(idx)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}
