//! Firefly MH on the extended target
//! π̃(θ, z) ∝ p(θ) Π_i e^{b_i(θ)} Π_{i: z_i = 1} (e^{ℓ_i(θ) − b_i(θ)} − 1).

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::proposal::Proposal;
use super::trace::ChainTrace;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{BoundSpec, Model};
use crate::proxy::{build_proxy, TaylorProxy};
use crate::rng::Streams;
use crate::Theta;

/// Likelihood terms with cheap lower bounds b_i(θ) ≤ ℓ_i(θ).
pub trait FireflyTarget {
    /// Per-state data needed to evaluate the bounds.
    type Ctx;

    fn n(&self) -> usize;
    fn log_prior(&self, theta: &Theta) -> f64;
    fn log_lik(&self, i: usize, theta: &Theta) -> f64;
    /// Fails when the bounds are not valid at θ.
    fn bound_context(&self, theta: &Theta) -> Result<Self::Ctx>;
    fn lower_bound(&self, i: usize, ctx: &Self::Ctx) -> f64;
    /// Σ_i b_i(θ), without touching the likelihood.
    fn lower_bound_sum(&self, ctx: &Self::Ctx) -> f64;
}

/// Taylor lower bounds of a model, read from a proxy store.
pub struct TaylorBoundTarget<'a> {
    model: &'a Model,
    data: &'a Dataset,
    proxy: TaylorProxy,
    remainder_m: f64,
}

pub struct TaylorCtx {
    offset: Vec<f64>,
    remainder: f64,
    sum: f64,
}

impl<'a> TaylorBoundTarget<'a> {
    /// Precomputes ℓ_i(θ★), ∇ℓ_i(θ★), ∇²ℓ_i(θ★) for every datum.
    pub fn new(model: &'a Model, data: &'a Dataset, bound: &BoundSpec) -> Result<Self> {
        let proxy = build_proxy(model, data, &bound.theta_star)?;
        Ok(Self {
            model,
            data,
            proxy,
            remainder_m: bound.remainder_m,
        })
    }
}

impl FireflyTarget for TaylorBoundTarget<'_> {
    type Ctx = TaylorCtx;

    fn n(&self) -> usize {
        self.data.n()
    }

    fn log_prior(&self, theta: &Theta) -> f64 {
        self.model.log_prior(theta.as_slice())
    }

    fn log_lik(&self, i: usize, theta: &Theta) -> f64 {
        self.model.log_lik_unchecked(self.data, i, theta.as_slice())
    }

    fn bound_context(&self, theta: &Theta) -> Result<TaylorCtx> {
        let th = theta.as_slice();
        if th.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteParameter(
                th.iter().position(|v| !v.is_finite()).unwrap_or(0),
            ));
        }
        if !self.model.in_trust_region(self.proxy.theta_star().as_slice(), th) {
            return Err(Error::OutsideTrustRegion {
                radius: self.model.trust_radius,
            });
        }
        let offset: Vec<f64> = th
            .iter()
            .zip(self.proxy.theta_star().iter())
            .map(|(a, b)| a - b)
            .collect();
        let remainder = self.remainder_m / 6.0 * self.proxy.remainder_norm().cube(&offset);
        let sum = self.proxy.lower_bound_sum_with(th, remainder);
        Ok(TaylorCtx { offset, remainder, sum })
    }

    fn lower_bound(&self, i: usize, ctx: &TaylorCtx) -> f64 {
        self.proxy.lower_bound_i(self.data, i, &ctx.offset, ctx.remainder)
    }

    fn lower_bound_sum(&self, ctx: &TaylorCtx) -> f64 {
        ctx.sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FireflyConfig {
    /// Fraction of the z_i resampled per sweep.
    #[serde(default = "default_fraction")]
    pub resample_fraction: f64,
}

fn default_fraction() -> f64 {
    0.1
}

impl Default for FireflyConfig {
    fn default() -> Self {
        Self {
            resample_fraction: default_fraction(),
        }
    }
}

/// log(e^{ℓ−b} − 1), failing when b exceeds ℓ beyond round-off.
fn log_bright_weight(i: usize, ll: f64, b: f64) -> Result<f64> {
    let gap = ll - b;
    if gap < -1e-10 * (1.0 + ll.abs()) {
        return Err(Error::InvalidBound {
            index: i,
            bound: b,
            log_lik: ll,
        });
    }
    Ok(gap.max(0.0).exp_m1().ln())
}

/// Gibbs sweeps alternating an MH move on θ and a partial refresh of z.
pub struct FireflySampler<'t, T: FireflyTarget, P: Proposal> {
    target: &'t T,
    proposal: P,
    config: FireflyConfig,
    streams: Streams,
    theta: Theta,
    ctx: T::Ctx,
    z: Vec<bool>,
    bright: Vec<usize>,
    bright_pos: Vec<usize>,
    ll_cache: Vec<f64>,
    ll_stamp: Vec<u64>,
    epoch: u64,
    iteration: usize,
}

impl<'t, T: FireflyTarget, P: Proposal> FireflySampler<'t, T, P> {
    /// Draws the initial z from its exact conditional at θ0.
    pub fn new(target: &'t T, proposal: P, config: FireflyConfig, theta0: &Theta, seed: u64) -> Result<Self> {
        if !(config.resample_fraction > 0.0 && config.resample_fraction <= 1.0) {
            return Err(Error::invalid("resample fraction must lie in (0, 1]"));
        }
        let n = target.n();
        let ctx = target.bound_context(theta0)?;
        let mut s = Self {
            target,
            proposal,
            config,
            streams: Streams::new(seed),
            theta: theta0.clone(),
            ctx,
            z: vec![false; n],
            bright: Vec::new(),
            bright_pos: vec![usize::MAX; n],
            ll_cache: vec![0.0; n],
            ll_stamp: vec![0; n],
            epoch: 1,
            iteration: 0,
        };
        for i in 0..n {
            let ll = target.log_lik(i, theta0);
            s.ll_cache[i] = ll;
            s.ll_stamp[i] = s.epoch;
            let b = target.lower_bound(i, &s.ctx);
            log_bright_weight(i, ll, b)?;
            let p = -(b - ll).min(0.0).exp_m1();
            let on = s.streams.auxiliary.random::<f64>() < p;
            s.set_z(i, on);
        }
        Ok(s)
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn z(&self) -> &[bool] {
        &self.z
    }

    pub fn n_bright(&self) -> usize {
        self.bright.len()
    }

    pub fn proposal(&self) -> &P {
        &self.proposal
    }

    fn set_z(&mut self, i: usize, on: bool) {
        if on == self.z[i] {
            return;
        }
        self.z[i] = on;
        if on {
            self.bright_pos[i] = self.bright.len();
            self.bright.push(i);
        } else {
            let p = self.bright_pos[i];
            let last = *self.bright.last().expect("bright list holds i");
            self.bright.swap_remove(p);
            if last != i {
                self.bright_pos[last] = p;
            }
            self.bright_pos[i] = usize::MAX;
        }
    }

    fn current_ll(&mut self, i: usize, evals: &mut u64) -> f64 {
        if self.ll_stamp[i] != self.epoch {
            self.ll_cache[i] = self.target.log_lik(i, &self.theta);
            self.ll_stamp[i] = self.epoch;
            *evals += 1;
        }
        self.ll_cache[i]
    }

    /// One sweep; returns whether θ moved and the likelihood evaluations
    /// spent.
    pub fn step(&mut self) -> Result<(bool, u64)> {
        self.iteration += 1;
        let mut evals = 0u64;
        let theta_prime = self.proposal.propose(&self.theta, &mut self.streams.proposal);
        let u: f64 = self.streams.uniform.random();
        let ctx_prime = self.target.bound_context(&theta_prime)?;
        let mut log_ratio = self.target.log_prior(&theta_prime) - self.target.log_prior(&self.theta)
            + self.proposal.log_q_ratio(&self.theta, &theta_prime)
            + (self.target.lower_bound_sum(&ctx_prime) - self.target.lower_bound_sum(&self.ctx));
        let mut proposed_ll = Vec::with_capacity(self.bright.len());
        for k in 0..self.bright.len() {
            let i = self.bright[k];
            let ll_new = self.target.log_lik(i, &theta_prime);
            evals += 1;
            let b_new = self.target.lower_bound(i, &ctx_prime);
            let ll_old = self.current_ll(i, &mut evals);
            let b_old = self.target.lower_bound(i, &self.ctx);
            log_ratio += log_bright_weight(i, ll_new, b_new)? - log_bright_weight(i, ll_old, b_old)?;
            proposed_ll.push(ll_new);
        }
        let accepted = u.ln() < log_ratio;
        if accepted {
            self.theta = theta_prime;
            self.ctx = ctx_prime;
            self.epoch += 1;
            for (k, &i) in self.bright.iter().enumerate() {
                self.ll_cache[i] = proposed_ll[k];
                self.ll_stamp[i] = self.epoch;
            }
        }
        self.proposal.adapt(self.iteration, accepted);

        let n = self.target.n();
        let m = ((self.config.resample_fraction * n as f64).round() as usize).clamp(1, n);
        let picks = index::sample(&mut self.streams.auxiliary, n, m);
        for i in picks.iter() {
            let ll = self.current_ll(i, &mut evals);
            let b = self.target.lower_bound(i, &self.ctx);
            log_bright_weight(i, ll, b)?;
            let p = -(b - ll).min(0.0).exp_m1();
            let on = self.streams.auxiliary.random::<f64>() < p;
            self.set_z(i, on);
        }
        Ok((accepted, evals))
    }
}

/// Firefly MH with Taylor lower bounds around `bound.theta_star`.
pub fn firefly_run<P: Proposal>(
    model: &Model,
    data: &Dataset,
    bound: &BoundSpec,
    config: FireflyConfig,
    proposal: P,
    theta0: &Theta,
    n_iter: usize,
    seed: u64,
) -> Result<ChainTrace> {
    model.validate(data)?;
    model.check_theta(data, theta0.as_slice())?;
    let target = TaylorBoundTarget::new(model, data, bound)?;
    let mut sampler = FireflySampler::new(&target, proposal, config, theta0, seed)?;
    let mut trace = ChainTrace::new(data.n(), seed, "firefly");
    for _ in 0..n_iter {
        let (acc, evals) = sampler.step()?;
        trace.push(sampler.theta().clone(), acc, evals);
    }
    Ok(trace)
}
