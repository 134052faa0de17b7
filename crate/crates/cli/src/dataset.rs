//! CSV ingestion and the simulated-dataset writer.

use std::collections::BTreeMap;
use std::path::Path;

use bicausal::model::{ColumnNames, Dataset};
use bicausal::numerics::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::format::fmt17;

/// Cell values treated as missing.
pub const MISSING_TOKENS: [&str; 5] = ["", "NA", "N/A", "NaN", "."];

/// Which CSV columns play which role, and how to turn text into numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnSchema {
    pub x_column: String,
    pub y_column: String,
    pub z_column: String,
    pub w_column: String,
    /// `None` means every column not assigned a role, in header order.
    pub covariate_columns: Option<Vec<String>>,
    /// Literal to 0/1, applied to every used column before numeric parsing.
    pub binary_recodings: BTreeMap<String, u8>,
    /// Z-scored with the post-deletion sample mean and sd (n − 1).
    pub standardize_columns: Vec<String>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            x_column: "x".into(),
            y_column: "y".into(),
            z_column: "z".into(),
            w_column: "w".into(),
            covariate_columns: None,
            binary_recodings: BTreeMap::new(),
            standardize_columns: Vec::new(),
        }
    }
}

impl ColumnSchema {
    fn roles(&self) -> [&str; 4] {
        [&self.x_column, &self.y_column, &self.z_column, &self.w_column]
    }

    pub fn validate(&self) -> Result<()> {
        let roles = self.roles();
        for i in 0..4 {
            if roles[i + 1..].contains(&roles[i]) {
                return Err(CliError::Schema(format!("column '{}' has two roles", roles[i])));
            }
        }
        if let Some(c) = self.covariate_columns.iter().flatten().find(|c| roles.contains(&c.as_str())) {
            return Err(CliError::Schema(format!("covariate '{c}' is also a role column")));
        }
        if let Some((lit, v)) = self.binary_recodings.iter().find(|(_, v)| **v > 1) {
            return Err(CliError::Schema(format!("recoding '{lit}' maps to {v}, expected 0 or 1")));
        }
        for c in [&self.x_column, &self.y_column] {
            if self.standardize_columns.contains(c) {
                return Err(CliError::Schema(format!("binary outcome '{c}' cannot be standardized")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnMoments {
    pub mean: f64,
    pub sd: f64,
}

/// What happened between the file and the [`Dataset`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub n_read: usize,
    pub n_kept: usize,
    pub n_dropped: usize,
    pub covariates: Vec<String>,
    /// Raw moments of each standardized column, before z-scoring.
    pub standardized: BTreeMap<String, ColumnMoments>,
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub data: Dataset,
    pub provenance: Provenance,
}

fn parse_cell(raw: &str, column: &str, row: usize, schema: &ColumnSchema) -> Result<Option<f64>> {
    let s = raw.trim();
    if MISSING_TOKENS.contains(&s) {
        return Ok(None);
    }
    if let Some(v) = schema.binary_recodings.get(s) {
        return Ok(Some(f64::from(*v)));
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Err(CliError::InvalidValue { column: column.into(), row, message: format!("non-finite value '{s}'") }),
        Err(_) => Err(CliError::UnmappedLiteral { column: column.into(), literal: s.into() }),
    }
}

fn moments(v: &[f64]) -> ColumnMoments {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    ColumnMoments { mean, sd }
}

fn to_binary(v: &[f64], column: &str) -> Result<Vec<bool>> {
    v.iter()
        .enumerate()
        .map(|(i, &a)| match a {
            a if a == 0.0 => Ok(false),
            a if a == 1.0 => Ok(true),
            a => Err(CliError::InvalidValue {
                column: column.into(),
                row: i + 1,
                message: format!("outcome must be 0 or 1 after recoding, got {a}"),
            }),
        })
        .collect()
}

/// Reads a header-first CSV into a [`Dataset`].
///
/// Rows with a missing value in any used column are dropped and counted.
/// Binary outcomes must be 0/1 after recoding. Row numbers in errors count
/// data rows from 1 in the file.
pub fn load_csv(path: &Path, schema: &ColumnSchema) -> Result<LoadedDataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::csv(path, e))?;
    let header: Vec<String> = reader.headers().map_err(|e| CliError::csv(path, e))?.iter().map(String::from).collect();
    let index_of = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| CliError::MissingColumn(name.into()));

    let roles = schema.roles();
    let covariates: Vec<String> = match &schema.covariate_columns {
        Some(c) => c.clone(),
        None => header.iter().filter(|h| !roles.contains(&h.as_str())).cloned().collect(),
    };
    let used: Vec<String> = roles.iter().map(|s| s.to_string()).chain(covariates.iter().cloned()).collect();
    if let Some(c) = schema.standardize_columns.iter().find(|c| !used.contains(c)) {
        return Err(CliError::Schema(format!("standardized column '{c}' is not used by the model")));
    }
    let idx: Vec<usize> = used.iter().map(|c| index_of(c)).collect::<Result<_>>()?;

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); used.len()];
    let (mut n_read, mut n_dropped) = (0, 0);
    for record in reader.records() {
        let record = record.map_err(|e| CliError::csv(path, e))?;
        n_read += 1;
        let mut row = Vec::with_capacity(used.len());
        for (j, &k) in idx.iter().enumerate() {
            let raw = record.get(k).ok_or_else(|| CliError::parse(path, format!("data row {n_read} is short")))?;
            row.push(parse_cell(raw, &used[j], n_read, schema)?);
        }
        if row.iter().any(Option::is_none) {
            n_dropped += 1;
            continue;
        }
        for (col, v) in columns.iter_mut().zip(row) {
            col.push(v.expect("checked above"));
        }
    }
    let n = columns[0].len();
    if n == 0 {
        return Err(CliError::EmptyAfterFiltering { dropped: n_dropped });
    }

    let mut standardized = BTreeMap::new();
    for name in &schema.standardize_columns {
        let j = used.iter().position(|c| c == name).expect("checked above");
        let m = moments(&columns[j]);
        if !(m.sd > 0.0) {
            return Err(CliError::InvalidValue {
                column: name.clone(),
                row: 0,
                message: "cannot standardize a column with zero sample variance".into(),
            });
        }
        for v in columns[j].iter_mut() {
            *v = (*v - m.mean) / m.sd;
        }
        standardized.insert(name.clone(), m);
    }

    let mut it = columns.into_iter();
    let x = to_binary(&it.next().expect("x"), &schema.x_column)?;
    let y = to_binary(&it.next().expect("y"), &schema.y_column)?;
    let z = it.next().expect("z");
    let w = it.next().expect("w");
    let rest: Vec<Vec<f64>> = it.collect();
    let q = (!rest.is_empty()).then(|| Matrix::from_fn(n, rest.len(), |i, j| rest[j][i]));
    let names = ColumnNames {
        x: schema.x_column.clone(),
        y: schema.y_column.clone(),
        z: schema.z_column.clone(),
        w: schema.w_column.clone(),
        q: covariates.clone(),
    };
    Ok(LoadedDataset {
        data: Dataset::with_names(x, y, z, w, q, names)?,
        provenance: Provenance { n_read, n_kept: n, n_dropped, covariates, standardized },
    })
}

/// Writes `x, y, z, w, <covariates>`: outcomes as 0/1 and every real value
/// at 17 significant digits.
pub fn write_dataset_csv(path: &Path, d: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let mut header = vec![d.names.x.clone(), d.names.y.clone(), d.names.z.clone(), d.names.w.clone()];
    header.extend(d.names.q.iter().cloned());
    w.write_record(&header).map_err(|e| CliError::csv(path, e))?;
    let bit = |b: bool| if b { "1".to_string() } else { "0".to_string() };
    for i in 0..d.n() {
        let mut rec = vec![bit(d.x[i]), bit(d.y[i]), fmt17(d.z[i]), fmt17(d.w[i])];
        if let Some(q) = &d.q {
            rec.extend((0..q.ncols()).map(|j| fmt17(q[(i, j)])));
        }
        w.write_record(&rec).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
