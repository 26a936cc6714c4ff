//! Unbiased likelihood estimators for pseudo-marginal MH: the variance of
//! the Firefly estimator and the Rhee–Glynn randomly truncated series.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use super::proposal::Proposal;
use super::trace::ChainTrace;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::proxy::TaylorProxy;
use crate::rng::Streams;
use crate::Theta;

/// Variance of Σ_i log p(x_i|θ, z_i) under z_i ~ Bernoulli(1 − I).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmVariance {
    pub value: f64,
    /// Some ℓ_i equals b_i, so a log(0) term makes the variance infinite.
    pub infinite: bool,
}

/// I(1−I) Σ_i log²[(I/(1−I))(e^{ℓ_i−b_i} − 1)].
pub fn firefly_pm_variance(ell: &[f64], b: &[f64], i_theta: f64) -> Result<PmVariance> {
    if ell.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: ell.len(),
            got: b.len(),
        });
    }
    if !(i_theta > 0.0 && i_theta < 1.0) {
        return Err(Error::invalid("I_theta must lie in (0, 1)"));
    }
    let odds = (i_theta / (1.0 - i_theta)).ln();
    let mut sum = 0.0;
    for (i, (&l, &bi)) in ell.iter().zip(b).enumerate() {
        if bi > l {
            return Err(Error::InvalidBound {
                index: i,
                bound: bi,
                log_lik: l,
            });
        }
        if bi == l {
            return Ok(PmVariance {
                value: f64::INFINITY,
                infinite: true,
            });
        }
        let term = odds + (l - bi).exp_m1().ln();
        sum += term * term;
    }
    Ok(PmVariance {
        value: i_theta * (1.0 - i_theta) * sum,
        infinite: false,
    })
}

/// Leading term of the lower bound on Var Y / e^{2nℓ(θ)}:
/// exp(−2n·gap + 2n√A) / (n√A), A = (1+ε)(σ_t² + gap²).
pub fn rhee_glynn_variance_lower_bound(n: usize, sigma_t: f64, gap: f64, eps: f64) -> f64 {
    let n = n as f64;
    let root = ((1.0 + eps) * (sigma_t * sigma_t + gap * gap)).sqrt();
    (-2.0 * n * gap + 2.0 * n * root).exp() / (n * root)
}

/// log Y of the Rhee–Glynn estimator of e^{nℓ(θ)}.
///
/// `a_theta` must not exceed any ℓ_i(θ); the check costs a full pass and is
/// done by [`rhee_glynn_estimate`], not here.
pub fn rhee_glynn_log_estimate(
    model: &Model,
    data: &Dataset,
    theta: &Theta,
    a_theta: f64,
    t: usize,
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, u64)> {
    if t == 0 {
        return Err(Error::invalid("subsample size must be at least 1"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    let n = data.n();
    let nf = n as f64;
    let th = theta.as_slice();
    // N counts failures of Bernoulli(ε/(1+ε)) trials, so P(N ≥ k) = (1+ε)^{−k}
    let geo = Geometric::new(eps / (1.0 + eps)).map_err(|e| Error::invalid(e.to_string()))?;
    let big_n = geo.sample(rng);
    let log_growth = (1.0 + eps).ln();
    // terms[k] = log[(1+ε)^k / k! Π_{j≤k} D_j]; term 0 is log 1
    let mut log_terms = vec![0.0];
    let mut log_prod = 0.0;
    let mut evals = 0u64;
    for k in 1..=big_n {
        let mut s = 0.0;
        for _ in 0..t {
            s += model.log_lik_unchecked(data, rng.random_range(0..n), th);
        }
        evals += t as u64;
        let d = nf / t as f64 * s - nf * a_theta;
        if d <= 0.0 {
            break;
        }
        log_prod += d.ln() - (k as f64).ln() + log_growth;
        log_terms.push(log_prod);
    }
    let top = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + log_terms.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
    Ok((nf * a_theta + lse, evals))
}

/// Y = e^{na}[1 + Σ_{k=1}^N (1+ε)^k / k! Π_{j≤k} D_j], checking a ≤ min_i ℓ_i(θ).
pub fn rhee_glynn_estimate(
    model: &Model,
    data: &Dataset,
    theta: &Theta,
    a_theta: f64,
    t: usize,
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    model.check_theta(data, theta.as_slice())?;
    let min_ll = (0..data.n())
        .map(|i| model.log_lik_unchecked(data, i, theta.as_slice()))
        .fold(f64::INFINITY, f64::min);
    if a_theta > min_ll {
        return Err(Error::invalid(format!(
            "a(theta) = {a_theta} exceeds the smallest log-likelihood {min_ll}"
        )));
    }
    Ok(rhee_glynn_log_estimate(model, data, theta, a_theta, t, eps, rng)?
        .0
        .exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RheeGlynnConfig {
    /// Subsample size per D_j.
    pub t: usize,
    pub eps: f64,
}

impl Default for RheeGlynnConfig {
    fn default() -> Self {
        Self { t: 100, eps: 1.0 }
    }
}

/// Pseudo-marginal MH on the Rhee–Glynn estimator with a(θ) = min_i b_i(θ),
/// the smallest Taylor lower bound from `proxy`.
pub fn rhee_glynn_run<P: Proposal + ?Sized>(
    model: &Model,
    data: &Dataset,
    proxy: &TaylorProxy,
    config: RheeGlynnConfig,
    proposal: &mut P,
    theta0: &Theta,
    n_iter: usize,
    seed: u64,
) -> Result<ChainTrace> {
    model.validate(data)?;
    let mut streams = Streams::new(seed);
    let mut trace = ChainTrace::new(data.n(), seed, "rhee_glynn");
    let a_of = |theta: &Theta| -> Result<f64> {
        if !proxy.covers(theta.as_slice()) {
            return Err(Error::OutsideTrustRegion {
                radius: model.trust_radius,
            });
        }
        let (offset, r) = proxy.lower_bound_terms(theta.as_slice());
        Ok((0..data.n())
            .map(|i| proxy.lower_bound_i(data, i, &offset, r))
            .fold(f64::INFINITY, f64::min))
    };
    let mut theta = theta0.clone();
    let a0 = a_of(&theta)?;
    let (mut log_y, _) =
        rhee_glynn_log_estimate(model, data, &theta, a0, config.t, config.eps, &mut streams.subsample)?;
    for k in 1..=n_iter {
        let theta_prime = proposal.propose(&theta, &mut streams.proposal);
        let u: f64 = streams.uniform.random();
        let mut evals = 0;
        let accepted = match a_of(&theta_prime) {
            Ok(a) => {
                let (ly, e) = rhee_glynn_log_estimate(
                    model,
                    data,
                    &theta_prime,
                    a,
                    config.t,
                    config.eps,
                    &mut streams.subsample,
                )?;
                evals = e;
                let ratio = ly - log_y + model.log_prior(theta_prime.as_slice()) - model.log_prior(theta.as_slice())
                    + proposal.log_q_ratio(&theta, &theta_prime);
                let acc = u.ln() < ratio;
                if acc {
                    log_y = ly;
                }
                acc
            }
            Err(Error::OutsideTrustRegion { .. }) => false,
            Err(e) => return Err(e),
        };
        if accepted {
            theta = theta_prime;
        }
        proposal.adapt(k, accepted);
        trace.push(theta.clone(), accepted, evals.min(2 * data.n() as u64));
    }
    Ok(trace)
}
