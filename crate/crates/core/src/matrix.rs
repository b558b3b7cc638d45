//! Engineered feature matrices.
//!
//! [`FeatureMatrix`] carries the engineered numeric values together with a
//! missingness mask, feature names, labels, and donor ids. Once imputation
//! has removed every missing cell the matrix can be lowered to a
//! [`DenseMatrix`] that models consume.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major numeric matrix with a per-cell missingness mask.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub donor_ids: Vec<String>,
    /// Labels aligned with `donor_ids`; 1 = transplanted (positive class),
    /// 0 = discarded. Empty when the matrix carries unlabeled rows.
    pub labels: Vec<u8>,
    /// Row-major values; missing cells hold NaN and are flagged in `mask`.
    pub values: Vec<f64>,
    /// Row-major mask; true = missing.
    pub mask: Vec<bool>,
}

impl FeatureMatrix {
    pub fn new(feature_names: Vec<String>, donor_ids: Vec<String>, labels: Vec<u8>) -> Self {
        let n = donor_ids.len() * feature_names.len();
        FeatureMatrix {
            feature_names,
            donor_ids,
            labels,
            values: vec![f64::NAN; n],
            mask: vec![true; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.donor_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.feature_names.len()
    }

    #[inline]
    fn at(&self, row: usize, col: usize) -> usize {
        row * self.feature_names.len() + col
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = self.at(row, col);
        if self.mask[i] {
            None
        } else {
            Some(self.values[i])
        }
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let i = self.at(row, col);
        self.values[i] = value;
        self.mask[i] = false;
    }

    pub fn set_missing(&mut self, row: usize, col: usize) {
        let i = self.at(row, col);
        self.values[i] = f64::NAN;
        self.mask[i] = true;
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.mask[self.at(row, col)]
    }

    pub fn col_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Observed (non-missing) values of one column.
    pub fn observed_column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows())
            .filter_map(|r| self.get(r, col))
            .collect()
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Fraction of missing cells in one column.
    pub fn missing_fraction(&self, col: usize) -> f64 {
        if self.n_rows() == 0 {
            return 0.0;
        }
        let miss = (0..self.n_rows())
            .filter(|&r| self.is_missing(r, col))
            .count();
        miss as f64 / self.n_rows() as f64
    }

    /// Keeps only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let c = self.n_cols();
        let mut out = FeatureMatrix {
            feature_names: self.feature_names.clone(),
            donor_ids: rows.iter().map(|&r| self.donor_ids[r].clone()).collect(),
            labels: if self.labels.is_empty() {
                Vec::new()
            } else {
                rows.iter().map(|&r| self.labels[r]).collect()
            },
            values: Vec::with_capacity(rows.len() * c),
            mask: Vec::with_capacity(rows.len() * c),
        };
        for &r in rows {
            out.values
                .extend_from_slice(&self.values[r * c..(r + 1) * c]);
            out.mask.extend_from_slice(&self.mask[r * c..(r + 1) * c]);
        }
        out
    }

    /// Keeps only the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let mut out = FeatureMatrix {
            feature_names: cols
                .iter()
                .map(|&c| self.feature_names[c].clone())
                .collect(),
            donor_ids: self.donor_ids.clone(),
            labels: self.labels.clone(),
            values: Vec::with_capacity(self.n_rows() * cols.len()),
            mask: Vec::with_capacity(self.n_rows() * cols.len()),
        };
        for r in 0..self.n_rows() {
            for &c in cols {
                let i = self.at(r, c);
                out.values.push(self.values[i]);
                out.mask.push(self.mask[i]);
            }
        }
        out
    }

    /// Lowers to a dense matrix; fails if any cell is still missing.
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        if self.missing_count() > 0 {
            return Err(Error::Feature(format!(
                "matrix still has {} missing cells",
                self.missing_count()
            )));
        }
        Ok(DenseMatrix {
            n_rows: self.n_rows(),
            n_cols: self.n_cols(),
            data: self.values.clone(),
        })
    }

    /// Writes the matrix as CSV (donor_id, label, then one column per feature,
    /// missing cells empty) plus a sidecar schema JSON.
    pub fn write_csv(&self, csv_path: &Path, schema_path: Option<&Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(csv_path)?);
        let mut header = vec!["donor_id".to_string(), "label".to_string()];
        header.extend(self.feature_names.iter().cloned());
        writeln!(
            w,
            "{}",
            header
                .iter()
                .map(|h| csv_escape(h))
                .collect::<Vec<_>>()
                .join(",")
        )?;
        for r in 0..self.n_rows() {
            let mut fields = vec![
                csv_escape(&self.donor_ids[r]),
                if self.labels.is_empty() {
                    String::new()
                } else {
                    self.labels[r].to_string()
                },
            ];
            for c in 0..self.n_cols() {
                match self.get(r, c) {
                    Some(v) => fields.push(format_f64(v)),
                    None => fields.push(String::new()),
                }
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        w.flush()?;
        if let Some(sp) = schema_path {
            let schema = MatrixSchema {
                feature_names: self.feature_names.clone(),
                n_rows: self.n_rows(),
                label_positive: "transplanted".to_string(),
            };
            std::fs::write(sp, serde_json::to_string_pretty(&schema)?)?;
        }
        Ok(())
    }

    /// Reads a matrix written by [`FeatureMatrix::write_csv`].
    pub fn read_csv(csv_path: &Path) -> Result<FeatureMatrix> {
        let reader = BufReader::new(std::fs::File::open(csv_path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Feature("empty matrix csv".into()))??;
        let cols = parse_csv_line(&header);
        if cols.len() < 2 || cols[0] != "donor_id" || cols[1] != "label" {
            return Err(Error::Feature(
                "matrix csv header must start with donor_id,label".into(),
            ));
        }
        let feature_names: Vec<String> = cols[2..].to_vec();
        let mut donor_ids = Vec::new();
        let mut labels = Vec::new();
        let mut values = Vec::new();
        let mut mask = Vec::new();
        let mut have_labels = true;
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields = parse_csv_line(&line);
            if fields.len() != feature_names.len() + 2 {
                return Err(Error::Feature(format!(
                    "row with {} fields, expected {}",
                    fields.len(),
                    feature_names.len() + 2
                )));
            }
            donor_ids.push(fields[0].clone());
            if fields[1].is_empty() {
                have_labels = false;
            } else {
                labels.push(
                    fields[1]
                        .parse::<u8>()
                        .map_err(|e| Error::Feature(format!("bad label '{}': {e}", fields[1])))?,
                );
            }
            for f in &fields[2..] {
                if f.is_empty() {
                    values.push(f64::NAN);
                    mask.push(true);
                } else {
                    let v = f
                        .parse::<f64>()
                        .map_err(|e| Error::Feature(format!("bad value '{f}': {e}")))?;
                    values.push(v);
                    mask.push(false);
                }
            }
        }
        Ok(FeatureMatrix {
            feature_names,
            donor_ids,
            labels: if have_labels { labels } else { Vec::new() },
            values,
            mask,
        })
    }
}

/// Sidecar schema for an exported matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixSchema {
    pub feature_names: Vec<String>,
    pub n_rows: usize,
    pub label_positive: String,
}

/// Dense, complete numeric matrix (row-major).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> DenseMatrix {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        DenseMatrix {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> DenseMatrix {
        DenseMatrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n_cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n_cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, c)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        DenseMatrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for r in 0..self.n_rows {
            let row = self.row(r);
            for &c in cols {
                data.push(row[c]);
            }
        }
        DenseMatrix {
            n_rows: self.n_rows,
            n_cols: cols.len(),
            data,
        }
    }
}

/// Formats an f64 with shortest round-trip representation.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

/// RFC-4180 style escaping for a CSV field.
pub fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Parses one CSV line with RFC-4180 quoting.
pub fn parse_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut in_quotes = false;
    let mut chars = line.chars().peekable();
    while let Some(ch) = chars.next() {
        if in_quotes {
            if ch == '"' {
                if chars.peek() == Some(&'"') {
                    cur.push('"');
                    chars.next();
                } else {
                    in_quotes = false;
                }
            } else {
                cur.push(ch);
            }
        } else if ch == '"' {
            in_quotes = true;
        } else if ch == ',' {
            fields.push(std::mem::take(&mut cur));
        } else {
            cur.push(ch);
        }
    }
    fields.push(cur);
    fields
}

/// Writes a generic CSV table.
pub fn write_csv_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        w,
        "{}",
        header
            .iter()
            .map(|h| csv_escape(h))
            .collect::<Vec<_>>()
            .join(",")
    )?;
    for row in rows {
        writeln!(
            w,
            "{}",
            row.iter()
                .map(|f| csv_escape(f))
                .collect::<Vec<_>>()
                .join(",")
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Column means keyed by feature name (observed cells only).
pub fn observed_means(m: &FeatureMatrix) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for c in 0..m.n_cols() {
        let obs = m.observed_column(c);
        if !obs.is_empty() {
            out.insert(
                m.feature_names[c].clone(),
                obs.iter().sum::<f64>() / obs.len() as f64,
            );
        }
    }
    out
}
