//! Targets induced by plugging naive Bernoulli-subsampled likelihood
//! estimates into MH.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::rng::{stream, Purpose};
use crate::Theta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaiveEstimator {
    /// n ℓ̂(θ) = Σ z_i ℓ_i(θ) / λ.
    Unbiased,
    /// n ℓ̃(θ) = Σ z_i ℓ_i(θ).
    Biased,
}

/// One grid point of the demonstration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaiveRow {
    pub theta: Vec<f64>,
    /// log p(θ) + Σ ℓ_i(θ).
    pub log_target: f64,
    /// log p(θ) + log of the Monte Carlo mean of the exponentiated estimate.
    pub log_induced_mc: f64,
    /// log p(θ) + Σ log[λ e^{ℓ_i/λ} + 1 − λ] (unbiased) or
    /// Σ log[λ e^{ℓ_i} + 1 − λ] (biased).
    pub log_induced_exact: f64,
    /// Relative standard error of the Monte Carlo mean.
    pub mc_rel_se: f64,
    /// π normalised over the grid.
    pub target: f64,
    /// Induced target (Monte Carlo) normalised over the grid.
    pub induced: f64,
}

fn normalise(logs: &[f64]) -> Vec<f64> {
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// Evaluates π and the induced target on `grid` with `n_mc` Bernoulli(λ)
/// replicates per point.
pub fn naive_subsample_demo(
    model: &Model,
    data: &Dataset,
    lambda: f64,
    estimator: NaiveEstimator,
    grid: &[Theta],
    n_mc: usize,
    seed: u64,
) -> Result<Vec<NaiveRow>> {
    model.validate(data)?;
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::invalid("lambda must lie in (0, 1]"));
    }
    if n_mc == 0 || grid.is_empty() {
        return Err(Error::invalid("need at least one grid point and one replicate"));
    }
    let mut rng = stream(seed, Purpose::Auxiliary);
    let scale = match estimator {
        NaiveEstimator::Unbiased => 1.0 / lambda,
        NaiveEstimator::Biased => 1.0,
    };
    let mut rows = Vec::with_capacity(grid.len());
    for theta in grid {
        let th = theta.as_slice();
        model.check_theta(data, th)?;
        let ll: Vec<f64> = (0..data.n()).map(|i| model.log_lik_unchecked(data, i, th)).collect();
        let lp = model.log_prior(th);
        let log_target = lp + ll.iter().sum::<f64>();
        let log_exact = lp
            + ll.iter()
                .map(|&l| (lambda * (scale * l).exp() + (1.0 - lambda)).ln())
                .sum::<f64>();
        let draws: Vec<f64> = (0..n_mc)
            .map(|_| {
                ll.iter()
                    .filter(|_| rng.random::<f64>() < lambda)
                    .map(|l| scale * l)
                    .sum::<f64>()
            })
            .collect();
        let top = draws.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = draws.iter().map(|d| (d - top).exp()).collect();
        let mean = w.iter().sum::<f64>() / n_mc as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_mc as f64 - 1.0).max(1.0);
        rows.push(NaiveRow {
            theta: th.to_vec(),
            log_target,
            log_induced_mc: lp + top + mean.ln(),
            log_induced_exact: log_exact,
            mc_rel_se: (var / n_mc as f64).sqrt() / mean,
            target: 0.0,
            induced: 0.0,
        });
    }
    let t = normalise(&rows.iter().map(|r| r.log_target).collect::<Vec<_>>());
    let s = normalise(&rows.iter().map(|r| r.log_induced_mc).collect::<Vec<_>>());
    for (r, (a, b)) in rows.iter_mut().zip(t.into_iter().zip(s)) {
        r.target = a;
        r.induced = b;
    }
    Ok(rows)
}

/// Variance of coordinate `j` under grid weights.
pub fn grid_variance(rows: &[NaiveRow], j: usize, induced: bool) -> f64 {
    let w = |r: &NaiveRow| if induced { r.induced } else { r.target };
    let mean: f64 = rows.iter().map(|r| w(r) * r.theta[j]).sum();
    rows.iter().map(|r| w(r) * (r.theta[j] - mean).powi(2)).sum()
}
