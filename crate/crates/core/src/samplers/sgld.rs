//! Stochastic gradient Langevin dynamics.

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::trace::ChainTrace;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::rng::Streams;
use crate::Theta;

/// ε_k = eps0 · k^{−exponent}; exponent 0 gives a constant step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSchedule {
    pub eps0: f64,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
}

fn default_exponent() -> f64 {
    1.0 / 3.0
}

impl StepSchedule {
    /// First step equal to the squared random-walk scale.
    pub fn from_rw_scale(scale: f64) -> Self {
        Self {
            eps0: scale * scale,
            exponent: default_exponent(),
        }
    }

    pub fn at(&self, k: usize) -> f64 {
        self.eps0 * (k as f64).powf(-self.exponent)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0) || !self.eps0.is_finite() {
            return Err(Error::invalid("SGLD eps0 must be positive"));
        }
        if !(self.exponent >= 0.0) {
            return Err(Error::invalid("SGLD exponent must be nonnegative"));
        }
        if self.exponent == 0.0 {
            log::info!("SGLD runs with a constant stepsize");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgldConfig {
    /// Minibatch size t.
    pub t_sub: usize,
    pub schedule: StepSchedule,
    /// Drops the injected noise, leaving stochastic gradient ascent.
    #[serde(default)]
    pub noiseless: bool,
}

/// θ_{k+1} = θ_k + (ε_{k+1}/2)[∇log p(θ_k) + (n/t)Σ∇ℓ_{i*}(θ_k)] + √ε_{k+1} η.
///
/// Minibatches are drawn without replacement; the trace carries the
/// stepsizes as weights for the weighted state average.
pub fn sgld_run(
    model: &Model,
    data: &Dataset,
    config: &SgldConfig,
    theta0: &Theta,
    n_iter: usize,
    seed: u64,
) -> Result<ChainTrace> {
    model.validate(data)?;
    model.check_theta(data, theta0.as_slice())?;
    config.schedule.validate()?;
    let n = data.n();
    if config.t_sub == 0 || config.t_sub > n {
        return Err(Error::invalid("SGLD minibatch size must lie in 1..=n"));
    }
    let mut streams = Streams::new(seed);
    let mut trace = ChainTrace::new(n, seed, "sgld");
    let mut weights = Vec::with_capacity(n_iter);
    let mut theta = theta0.clone();
    let dim = theta.len();
    let scale = n as f64 / config.t_sub as f64;
    let mut grad = vec![0.0; dim];
    for k in 1..=n_iter {
        let eps = config.schedule.at(k);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let th = theta.as_slice();
        for i in index::sample(&mut streams.subsample, n, config.t_sub).iter() {
            model.add_grad_unchecked(data, i, th, scale, &mut grad);
        }
        model.add_grad_log_prior(th, &mut grad);
        let noise = eps.sqrt();
        let next: Vec<f64> = (0..dim)
            .map(|j| {
                let eta: f64 = StandardNormal.sample(&mut streams.noise);
                let eta = if config.noiseless { 0.0 } else { eta };
                th[j] + 0.5 * eps * grad[j] + noise * eta
            })
            .collect();
        if let Some(j) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteUpdate {
                iteration: k,
                detail: format!("coordinate {j} became non-finite; reduce eps0"),
            });
        }
        theta = Theta::from_vec(next);
        weights.push(eps);
        trace.push(theta.clone(), true, config.t_sub as u64);
    }
    trace.weights = Some(weights);
    Ok(trace)
}
