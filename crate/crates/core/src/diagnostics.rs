//! Convergence and cost diagnostics over chain traces.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::samplers::{find_map, ChainTrace};
use crate::Theta;

/// Normalised autocovariances ρ̂(0..=max_lag).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Autocorrelation {
    pub values: Vec<f64>,
    /// The series has zero variance; `values` is all zero.
    pub constant: bool,
}

/// Biased autocovariance estimator normalised by lag 0.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Autocorrelation> {
    let n = series.len();
    if n < 2 {
        return Err(Error::invalid("autocorrelation needs at least two values"));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("autocorrelation input must be finite"));
    }
    let max_lag = max_lag.min(n - 1);
    let mean = series.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0 = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return Ok(Autocorrelation {
            values: vec![0.0; max_lag + 1],
            constant: true,
        });
    }
    let values = (0..=max_lag)
        .map(|k| c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 / c0)
        .collect();
    Ok(Autocorrelation {
        values,
        constant: false,
    })
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Split-chain potential scale reduction on the second halves of `chains`.
///
/// Chains are truncated to the shortest length. Returns infinity when the
/// within-chain variance vanishes but the chain means differ.
pub fn gelman_rubin(chains: &[&[f64]]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::invalid("Gelman-Rubin needs at least two chains"));
    }
    let len = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let half = len / 2;
    let l = half / 2;
    if l < 2 {
        return Err(Error::invalid("chains are too short for split Gelman-Rubin"));
    }
    let mut parts = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let tail = &c[len - 2 * l..len];
        if tail.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("Gelman-Rubin input must be finite"));
        }
        parts.push(&tail[..l]);
        parts.push(&tail[l..]);
    }
    let stats: Vec<(f64, f64)> = parts.iter().map(|p| mean_var(p)).collect();
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
    let lf = l as f64;
    let b = lf * mean_var(&means).1;
    if w == 0.0 {
        return Ok(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (lf - 1.0) / lf * w + b / lf;
    Ok((var_plus / w).sqrt())
}

/// Gaussian approximation centred at the MAP.
#[derive(Debug, Clone, PartialEq)]
pub struct BvmReference {
    pub center: Theta,
    /// Inverse of the observed information −∇² log π(θ_MAP).
    pub covariance: DMatrix<f64>,
}

pub fn bvm_reference(model: &Model, data: &Dataset) -> Result<BvmReference> {
    let map = find_map(model, data, &model.default_start(data), 1e-10)?;
    let (_, _, hess) = model.log_posterior_derivatives(data, map.theta.as_slice());
    let info = -hess;
    let chol = info
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("observed information at the MAP is not positive definite"))?;
    let mut covariance = chol.inverse();
    covariance = (&covariance + covariance.transpose()) * 0.5;
    if covariance.clone().symmetric_eigenvalues().iter().any(|&e| !(e > 0.0)) {
        return Err(Error::invalid("BvM covariance is not positive definite"));
    }
    Ok(BvmReference {
        center: map.theta,
        covariance,
    })
}

/// Comparison of one marginal between two traces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalComparison {
    pub coordinate: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub sd_a: f64,
    pub sd_b: f64,
    pub mean_diff: f64,
    pub sd_diff: f64,
    /// 1-Wasserstein distance between the weighted empirical marginals.
    pub wasserstein: f64,
}

fn trace_weights(trace: &ChainTrace) -> Vec<f64> {
    trace.weights.clone().unwrap_or_else(|| vec![1.0; trace.len()])
}

fn weighted_moments(x: &[f64], w: &[f64]) -> (f64, f64) {
    let s: f64 = w.iter().sum();
    let m = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / s;
    let v = x.iter().zip(w).map(|(a, b)| b * (a - m).powi(2)).sum::<f64>() / s;
    (m, v.sqrt())
}

/// ∫|F_a − F_b| for weighted 1-D empirical measures.
pub fn wasserstein_1d(a: &[f64], wa: &[f64], b: &[f64], wb: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() || a.len() != wa.len() || b.len() != wb.len() {
        return Err(Error::invalid(
            "Wasserstein inputs must be nonempty with matching weights",
        ));
    }
    let sa: f64 = wa.iter().sum();
    let sb: f64 = wb.iter().sum();
    if !(sa > 0.0 && sb > 0.0) || wa.iter().chain(wb).any(|&w| !(w >= 0.0)) {
        return Err(Error::invalid(
            "Wasserstein weights must be nonnegative with positive total",
        ));
    }
    let mut pts: Vec<(f64, f64)> = a
        .iter()
        .zip(wa)
        .map(|(&x, &w)| (x, w / sa))
        .chain(b.iter().zip(wb).map(|(&x, &w)| (x, -w / sb)))
        .collect();
    if pts.iter().any(|p| !p.0.is_finite()) {
        return Err(Error::invalid("Wasserstein inputs must be finite"));
    }
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    // separate CDF accumulators keep identical inputs exactly at zero
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut total = 0.0;
    for k in 0..pts.len() - 1 {
        if pts[k].1 >= 0.0 {
            fa += pts[k].1;
        } else {
            fb -= pts[k].1;
        }
        total += (fa - fb).abs() * (pts[k + 1].0 - pts[k].0);
    }
    Ok(total)
}

/// Per-coordinate mean, standard deviation and Wasserstein comparison.
/// Trace weights, when present, weight the states.
pub fn compare_posteriors(a: &ChainTrace, b: &ChainTrace) -> Result<Vec<MarginalComparison>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("cannot compare empty traces"));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let (wa, wb) = (trace_weights(a), trace_weights(b));
    (0..a.dim())
        .map(|j| {
            let (xa, xb) = (a.coordinate(j), b.coordinate(j));
            let (mean_a, sd_a) = weighted_moments(&xa, &wa);
            let (mean_b, sd_b) = weighted_moments(&xb, &wb);
            Ok(MarginalComparison {
                coordinate: j,
                mean_a,
                mean_b,
                sd_a,
                sd_b,
                mean_diff: mean_a - mean_b,
                sd_diff: sd_a - sd_b,
                wasserstein: wasserstein_1d(&xa, &wa, &xb, &wb)?,
            })
        })
        .collect()
}

/// Distribution of per-iteration evaluation fractions L_k/n.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub mean_fraction: f64,
    pub median_fraction: f64,
    /// (probability, quantile) pairs.
    pub quantiles: Vec<(f64, f64)>,
}

pub const SUMMARY_PROBS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn eval_summary(trace: &ChainTrace) -> Result<EvalSummary> {
    if trace.is_empty() {
        return Err(Error::invalid("cannot summarise an empty trace"));
    }
    let mut f = trace.eval_fractions();
    f.sort_by(f64::total_cmp);
    Ok(EvalSummary {
        mean_fraction: f.iter().sum::<f64>() / f.len() as f64,
        median_fraction: quantile_sorted(&f, 0.5),
        quantiles: SUMMARY_PROBS.iter().map(|&p| (p, quantile_sorted(&f, p))).collect(),
    })
}

/// Monte Carlo standard error of the mean by non-overlapping batch means,
/// with ⌊√len⌋ batches.
pub fn batch_means_se(series: &[f64]) -> Result<f64> {
    let n_batches = (series.len() as f64).sqrt().floor() as usize;
    if n_batches < 2 {
        return Err(Error::invalid("batch means need at least four values"));
    }
    let size = series.len() / n_batches;
    let means: Vec<f64> = series
        .chunks_exact(size)
        .take(n_batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    Ok((mean_var(&means).1 / n_batches as f64).sqrt())
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Store {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err(path))
}

/// Columns `lag,<name>...`.
pub fn write_autocorrelation_csv(path: &Path, series: &[(String, Autocorrelation)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let e = csv_err(path);
    let mut header = vec!["lag".to_string()];
    header.extend(series.iter().map(|s| s.0.clone()));
    w.write_record(&header).map_err(&e)?;
    let lags = series.iter().map(|s| s.1.values.len()).max().unwrap_or(0);
    for k in 0..lags {
        let mut row = vec![k.to_string()];
        row.extend(
            series
                .iter()
                .map(|s| s.1.values.get(k).map_or(String::new(), |v| v.to_string())),
        );
        w.write_record(&row).map_err(&e)?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}

/// Histogram with `bins` equal-width bins over `[lo, hi]`, columns
/// `bin_lo,bin_hi,count`.
pub fn write_histogram_csv(path: &Path, values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<()> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::invalid("histogram needs bins > 0 and hi > lo"));
    }
    let mut counts = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        if v >= lo && v <= hi {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let mut w = csv_writer(path)?;
    let e = csv_err(path);
    w.write_record(["bin_lo", "bin_hi", "count"]).map_err(&e)?;
    for (k, c) in counts.iter().enumerate() {
        let a = lo + k as f64 * width;
        w.write_record([a.to_string(), (a + width).to_string(), c.to_string()])
            .map_err(&e)?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}
