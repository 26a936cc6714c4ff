use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta, Standardization};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Feature,
    /// Binary class label; {0,1} is remapped to {-1,+1}.
    Label,
    /// Real response (gamma regression).
    Response,
    Ignore,
}

impl ColumnRole {
    fn name(self) -> &'static str {
        match self {
            ColumnRole::Feature => "feature",
            ColumnRole::Label => "label",
            ColumnRole::Response => "response",
            ColumnRole::Ignore => "ignore",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSpec {
    /// One role per column; empty means every column is a feature.
    #[serde(default)]
    pub column_roles: Vec<ColumnRole>,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub add_intercept: bool,
    #[serde(default)]
    pub has_header: bool,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Apply these constants instead of fitting new ones.
    #[serde(default)]
    pub constants: Option<Standardization>,
}

fn default_delimiter() -> char {
    ','
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        Self {
            column_roles: Vec::new(),
            standardize: false,
            add_intercept: false,
            has_header: false,
            delimiter: default_delimiter(),
            constants: None,
        }
    }
}

/// Parses a delimited text file into a dataset according to `spec`.
pub fn ingest_csv(path: &Path, spec: &PreprocessSpec) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    if !spec.delimiter.is_ascii() {
        return Err(Error::invalid("delimiter must be ASCII"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(spec.has_header)
        .delimiter(spec.delimiter as u8)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(0, format!("{other:?}")),
        })?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(parse_err(line, format!("expected {w} fields, found {}", record.len())));
        }
        let mut row = Vec::with_capacity(w);
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("column {}: non-numeric cell {cell:?}", j + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {}: non-finite value", j + 1)));
            }
            row.push(v);
        }
        rows.push(row);
    }
    let width = match width {
        Some(w) if !rows.is_empty() => w,
        _ => return Err(parse_err(0, "file contains no records".into())),
    };

    let roles: Vec<ColumnRole> = if spec.column_roles.is_empty() {
        vec![ColumnRole::Feature; width]
    } else if spec.column_roles.len() == width {
        spec.column_roles.clone()
    } else {
        return Err(Error::invalid(format!(
            "{} column roles for {width} columns",
            spec.column_roles.len()
        )));
    };
    let feature_cols: Vec<usize> = (0..width).filter(|&j| roles[j] == ColumnRole::Feature).collect();
    let target_cols: Vec<usize> = (0..width)
        .filter(|&j| matches!(roles[j], ColumnRole::Label | ColumnRole::Response))
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::invalid("no feature columns selected"));
    }
    if target_cols.len() > 1 {
        return Err(Error::invalid("at most one label/response column is allowed"));
    }

    let standardization = match (&spec.constants, spec.standardize) {
        (Some(c), _) => {
            if c.columns != feature_cols {
                return Err(Error::invalid(
                    "standardization constants do not match the feature columns",
                ));
            }
            Some(c.clone())
        }
        (None, true) => Some(fit_standardization(&rows, &feature_cols)?),
        (None, false) => None,
    };

    let n = rows.len();
    let d = feature_cols.len() + spec.add_intercept as usize;
    let mut features = Vec::with_capacity(n * d);
    for row in &rows {
        if spec.add_intercept {
            features.push(1.0);
        }
        for (k, &j) in feature_cols.iter().enumerate() {
            let v = match &standardization {
                Some(s) => (row[j] - s.means[k]) / s.sds[k],
                None => row[j],
            };
            features.push(v);
        }
    }

    let response = match target_cols.first() {
        None => None,
        Some(&j) if roles[j] == ColumnRole::Response => Some(rows.iter().map(|r| r[j]).collect()),
        Some(&j) => {
            let raw: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            Some(labels_to_pm1(&raw).map_err(|(i, v)| {
                parse_err(
                    i + 1 + spec.has_header as usize,
                    format!("label {v} is not in {{-1,+1}} or {{0,1}}"),
                )
            })?)
        }
    };

    let mut column_roles = Vec::new();
    if spec.add_intercept {
        column_roles.push("intercept".to_string());
    }
    column_roles.extend(feature_cols.iter().map(|_| "feature".to_string()));
    if let Some(&j) = target_cols.first() {
        column_roles.push(roles[j].name().to_string());
    }
    Ok(Dataset::new(features, d, response)?.with_meta(DatasetMeta {
        column_roles,
        standardization,
        intercept: spec.add_intercept,
        source: path.display().to_string(),
        ..Default::default()
    }))
}

fn fit_standardization(rows: &[Vec<f64>], cols: &[usize]) -> Result<Standardization> {
    let n = rows.len() as f64;
    let mut means = Vec::with_capacity(cols.len());
    let mut sds = Vec::with_capacity(cols.len());
    for &j in cols {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        if !(var > 0.0) {
            return Err(Error::invalid(format!(
                "column {} is constant and cannot be standardized",
                j + 1
            )));
        }
        means.push(mean);
        sds.push(var.sqrt());
    }
    Ok(Standardization {
        columns: cols.to_vec(),
        means,
        sds,
    })
}

fn labels_to_pm1(raw: &[f64]) -> std::result::Result<Vec<f64>, (usize, f64)> {
    let zero_one = raw.iter().all(|&v| v == 0.0 || v == 1.0);
    let pm1 = raw.iter().all(|&v| v == -1.0 || v == 1.0);
    if pm1 {
        return Ok(raw.to_vec());
    }
    if zero_one {
        log::info!("labels given in {{0,1}}; remapping 0 -> -1");
        return Ok(raw.iter().map(|&v| if v == 1.0 { 1.0 } else { -1.0 }).collect());
    }
    let bad = raw.iter().position(|&v| v != 0.0 && v != 1.0 && v != -1.0).unwrap_or(0);
    Err((bad, raw[bad]))
}
