//! Datasets: in-memory representation, synthetic generators, CSV ingestion
//! and the flat binary record store.

mod ingest;
mod store;
mod synthetic;

pub use ingest::{ingest_csv, ColumnRole, PreprocessSpec};
pub use store::{read_dataset, write_dataset};
pub use synthetic::{covtype_like_table, generate, SyntheticKind, SyntheticSpec};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Per-column affine standardization constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    /// Index of each standardized column in the raw file.
    pub columns: Vec<usize>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// Sidecar description of where a dataset came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub column_roles: Vec<String>,
    #[serde(default)]
    pub standardization: Option<Standardization>,
    #[serde(default)]
    pub intercept: bool,
    #[serde(default)]
    pub source: String,
}

/// Feature vectors with an optional per-record response (gamma) or label (logistic).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    features: Vec<f64>,
    response: Option<Vec<f64>>,
    max_inf_norm: f64,
    max_l1_norm: f64,
    max_l2_norm: f64,
    max_abs_response: f64,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Builds a dataset from row-major features of width `d`.
    pub fn new(features: Vec<f64>, d: usize, response: Option<Vec<f64>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !features.len().is_multiple_of(d) {
            return Err(Error::invalid(format!(
                "{} feature values do not split into rows of width {d}",
                features.len()
            )));
        }
        let n = features.len() / d;
        if let Some(r) = &response {
            if r.len() != n {
                return Err(Error::invalid(format!("{} responses for {n} records", r.len())));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite response"));
            }
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature in record {}", pos / d)));
        }
        let (mut inf, mut l1, mut l2) = (0.0f64, 0.0f64, 0.0f64);
        for row in features.chunks_exact(d) {
            inf = inf.max(row.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            l1 = l1.max(row.iter().map(|v| v.abs()).sum());
            l2 = l2.max(row.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        let max_abs_response = response
            .as_ref()
            .map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .unwrap_or(0.0);
        Ok(Self {
            n,
            d,
            features,
            response,
            max_inf_norm: inf,
            max_l1_norm: l1,
            max_l2_norm: l2,
            max_abs_response,
            meta: DatasetMeta {
                n,
                d,
                ..Default::default()
            },
        })
    }

    pub fn with_meta(mut self, meta: DatasetMeta) -> Self {
        self.meta = DatasetMeta {
            n: self.n,
            d: self.d,
            ..meta
        };
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn response(&self, i: usize) -> Option<f64> {
        self.response.as_ref().map(|r| r[i])
    }

    pub fn responses(&self) -> Option<&[f64]> {
        self.response.as_deref()
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// max_i ‖x_i‖_∞
    pub fn max_inf_norm(&self) -> f64 {
        self.max_inf_norm
    }

    /// max_i ‖x_i‖_1
    pub fn max_l1_norm(&self) -> f64 {
        self.max_l1_norm
    }

    /// max_i ‖x_i‖_2
    pub fn max_l2_norm(&self) -> f64 {
        self.max_l2_norm
    }

    pub fn max_abs_response(&self) -> f64 {
        self.max_abs_response
    }

    /// min_i x_iᵀθ.
    pub fn min_linear_form(&self, theta: &[f64]) -> f64 {
        self.features
            .chunks_exact(self.d)
            .map(|row| dot(row, theta))
            .fold(f64::INFINITY, f64::min)
    }

    /// Records at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(Error::invalid(format!("index {i} out of range {}", self.n)));
            }
            features.extend_from_slice(self.row(i));
        }
        let response = self.response.as_ref().map(|r| indices.iter().map(|&i| r[i]).collect());
        Ok(Self::new(features, self.d, response)?.with_meta(self.meta.clone()))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Uniform subset of `n_sub` records drawn without replacement.
pub fn subset(dataset: &Dataset, n_sub: usize, seed: u64) -> Result<Dataset> {
    if n_sub == 0 || n_sub > dataset.n() {
        return Err(Error::invalid(format!(
            "subset size {n_sub} must lie in 1..={}",
            dataset.n()
        )));
    }
    let mut rng = stream(seed, Purpose::Subsample);
    let picked = index::sample(&mut rng, dataset.n(), n_sub).into_vec();
    let mut out = dataset.select(&picked)?;
    out.meta.source = format!("{} [subset {n_sub} seed {seed}]", dataset.meta.source);
    Ok(out)
}
