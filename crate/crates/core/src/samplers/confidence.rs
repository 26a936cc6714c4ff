//! The confidence sampler, with or without Taylor proxies.
//!
//! Each iteration draws a growing subsample of per-datum log-likelihood
//! ratios (minus their proxies) and stops as soon as an empirical Bernstein
//! bound separates their running mean from the MH threshold. When the
//! subsample would cover the whole dataset the decision is made exactly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mh::Move;
use super::proposal::Proposal;
use super::trace::ChainTrace;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{EvalCounter, Model};
use crate::proxy::{build_proxy, ProxyPolicy, TaylorProxy};
use crate::rng::Streams;
use crate::Theta;

/// c_t(δ) = σ̂ √(2 log(3/δ) / t) + 6 C log(3/δ) / t.
pub fn bernstein_bound(sigma_hat: f64, range_c: f64, t: usize, delta_t: f64) -> f64 {
    let l = (3.0 / delta_t).ln();
    let t = t as f64;
    sigma_hat * (2.0 * l / t).sqrt() + 6.0 * range_c * l / t
}

/// Allocation of the error budget δ over successive looks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSchedule {
    /// δ_k = δ / 2^{k+1}, k = 0, 1, ...
    #[default]
    Geometric,
    /// c = ∞ at every look: every decision is made on the full data.
    Unreachable,
}

impl DeltaSchedule {
    pub fn delta_at(self, delta: f64, look: usize) -> f64 {
        match self {
            DeltaSchedule::Geometric => delta * 0.5f64.powi(look as i32 + 1),
            DeltaSchedule::Unreachable => 0.0,
        }
    }
}

/// How each batch is drawn from the points not used yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Draws with replacement among unused points, which are retired after
    /// each batch.
    #[default]
    WithReplacement,
    WithoutReplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfidenceConfig {
    pub delta: f64,
    #[serde(default)]
    pub schedule: DeltaSchedule,
    /// Geometric batch growth factor γ.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub sampling: Sampling,
}

fn default_gamma() -> f64 {
    1.5
}

impl Default for ConfidenceConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            schedule: DeltaSchedule::Geometric,
            gamma: default_gamma(),
            sampling: Sampling::WithReplacement,
        }
    }
}

impl ConfidenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        if !(self.gamma > 1.0) || !self.gamma.is_finite() {
            return Err(Error::invalid("batch growth must exceed 1"));
        }
        Ok(())
    }
}

/// Outcome of one confidence decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub accepted: bool,
    /// Number of draws averaged at the stopping time.
    pub t_used: usize,
    /// The whole dataset was read and the decision is exact.
    pub exhausted: bool,
    /// Likelihood evaluations spent.
    pub evals: u64,
    /// A proxy was used as control variate.
    pub proxy_used: bool,
}

/// Reusable per-chain buffers plus the cached full log-likelihood of the
/// current state.
#[derive(Debug, Clone)]
pub struct ConfidenceWorkspace {
    pool: Vec<usize>,
    pos: Vec<usize>,
    stamp: Vec<u64>,
    value: Vec<f64>,
    epoch: u64,
    current_full: Option<f64>,
}

impl ConfidenceWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            pool: (0..n).collect(),
            pos: (0..n).collect(),
            stamp: vec![0; n],
            value: vec![0.0; n],
            epoch: 0,
            current_full: None,
        }
    }

    /// Full log-likelihood of the current state, when known.
    pub fn cached_full(&self) -> Option<f64> {
        self.current_full
    }

    pub fn set_cached_full(&mut self, v: Option<f64>) {
        self.current_full = v;
    }

    pub(crate) fn swap_pool(&mut self, a: usize, b: usize) {
        self.pool.swap(a, b);
        self.pos[self.pool[a]] = a;
        self.pos[self.pool[b]] = b;
    }

    pub(crate) fn pool_at(&self, k: usize) -> usize {
        self.pool[k]
    }

    fn retire(&mut self, id: usize, retired: &mut usize) {
        let p = self.pos[id];
        let q = *retired;
        let other = self.pool[q];
        self.pool.swap(p, q);
        self.pos[other] = p;
        self.pos[id] = q;
        *retired += 1;
    }
}

/// One confidence decision for the move `mv`.
///
/// `proxy` is used as control variate when both states lie in its trust
/// region; otherwise the exact range of the plain ratios enters the bound.
pub fn confidence_step(
    model: &Model,
    data: &Dataset,
    config: &ConfidenceConfig,
    proxy: Option<&TaylorProxy>,
    ws: &mut ConfidenceWorkspace,
    mv: &Move,
    rng: &mut ChaCha8Rng,
) -> Result<StopDecision> {
    let n = data.n();
    let th = mv.theta.as_slice();
    let thp = mv.theta_prime.as_slice();
    if thp.iter().any(|v| !v.is_finite()) {
        return Ok(StopDecision {
            accepted: false,
            t_used: 0,
            exhausted: false,
            evals: 0,
            proxy_used: false,
        });
    }
    let proxy = proxy.filter(|p| p.covers(th) && p.covers(thp));
    let pair = proxy.map(|p| p.pair(th, thp));
    let proxy_mean = proxy.map_or(0.0, |p| p.proxy_sum(th, thp));
    // accept iff Λ* > ψ − (1/n)Σ℘_i
    let threshold = mv.psi(n) - proxy_mean;
    if config.schedule == DeltaSchedule::Unreachable {
        return exact_decision(model, data, ws, mv, 0, proxy.is_some());
    }
    let range_c = match proxy {
        Some(p) => 2.0 * p.remainder_bound(th, thp),
        None => exact_range(model, data, th, thp),
    };
    let cached = ws.current_full.is_some();
    ws.epoch += 1;
    let epoch = ws.epoch;
    let mut retired = 0usize;
    let mut distinct = 0u64;
    let mut t = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut b = 1usize;
    let mut look = 0usize;
    let mut batch = Vec::new();
    loop {
        batch.clear();
        let draws = b - t;
        for _ in 0..draws {
            if retired >= n {
                break;
            }
            let id = ws.pool[rng.random_range(retired..n)];
            if config.sampling == Sampling::WithoutReplacement {
                ws.retire(id, &mut retired);
            }
            if ws.stamp[id] != epoch {
                ws.stamp[id] = epoch;
                let mut v = model.log_lik_unchecked(data, id, thp) - model.log_lik_unchecked(data, id, th);
                if let Some(pr) = &pair {
                    v -= pr.pair_i(data, id);
                }
                ws.value[id] = v;
                distinct += 1;
                batch.push(id);
            }
            let v = ws.value[id];
            t += 1;
            let delta = v - mean;
            mean += delta / t as f64;
            m2 += delta * (v - mean);
        }
        if config.sampling == Sampling::WithReplacement {
            for &id in &batch {
                ws.retire(id, &mut retired);
            }
        }
        let sigma = (m2.max(0.0) / t as f64).sqrt();
        let c = bernstein_bound(sigma, range_c, t, config.schedule.delta_at(config.delta, look));
        look += 1;
        b = n.min((config.gamma * t as f64).ceil() as usize);
        if (mean - threshold).abs() >= c {
            let evals = if cached { distinct } else { 2 * distinct };
            return Ok(StopDecision {
                accepted: mean > threshold,
                t_used: t,
                exhausted: false,
                evals,
                proxy_used: proxy.is_some(),
            });
        }
        if t >= n || retired >= n {
            return exact_decision(model, data, ws, mv, t, proxy.is_some());
        }
    }
}

/// Decision from the full data, with the same arithmetic as vanilla MH.
fn exact_decision(
    model: &Model,
    data: &Dataset,
    ws: &mut ConfidenceWorkspace,
    mv: &Move,
    t: usize,
    proxy_used: bool,
) -> Result<StopDecision> {
    let mut counter = EvalCounter::default();
    let current = match ws.current_full {
        Some(v) => v,
        None => model.full_log_lik(data, mv.theta.as_slice(), &mut counter)?,
    };
    let proposed = model.full_log_lik(data, mv.theta_prime.as_slice(), &mut counter)?;
    let accepted = mv.accepts(proposed - current);
    ws.current_full = Some(if accepted { proposed } else { current });
    Ok(StopDecision {
        accepted,
        t_used: t.max(data.n()),
        exhausted: true,
        evals: counter.0,
        proxy_used,
    })
}

/// max_i r_i − min_i r_i of the plain log-likelihood ratios; this full pass
/// is not charged, mirroring a sampler that knows the range.
fn exact_range(model: &Model, data: &Dataset, th: &[f64], thp: &[f64]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..data.n() {
        let r = model.log_lik_unchecked(data, i, thp) - model.log_lik_unchecked(data, i, th);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if hi >= lo {
        hi - lo
    } else {
        f64::INFINITY
    }
}

/// A proxy together with its refresh policy.
#[derive(Debug, Clone)]
pub struct ProxySetup {
    pub proxy: TaylorProxy,
    pub policy: ProxyPolicy,
}

/// Per-run counters beyond the trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfidenceStats {
    pub exhausted: usize,
    pub refreshes: usize,
    /// Decisions taken without the proxy because a state left its trust region.
    pub proxy_fallbacks: usize,
}

/// Runs the confidence sampler for `n_iter` iterations.
///
/// With a proxy whose policy is due at iteration k, the proxy is rebuilt at
/// the current state and that iteration is a plain MH step charged 2n.
pub fn confidence_run<P: Proposal + ?Sized>(
    model: &Model,
    data: &Dataset,
    config: &ConfidenceConfig,
    proxy: Option<ProxySetup>,
    proposal: &mut P,
    theta0: &Theta,
    n_iter: usize,
    seed: u64,
) -> Result<(ChainTrace, ConfidenceStats)> {
    model.validate(data)?;
    config.validate()?;
    model.check_theta(data, theta0.as_slice())?;
    let n = data.n();
    let mut streams = Streams::new(seed);
    let tag = if proxy.is_some() {
        "confidence_proxy"
    } else {
        "confidence"
    };
    let mut trace = ChainTrace::new(n, seed, tag);
    let mut stats = ConfidenceStats::default();
    let mut ws = ConfidenceWorkspace::new(n);
    let (mut proxy, policy) = match proxy {
        Some(s) => {
            s.policy.validate()?;
            (Some(s.proxy), Some(s.policy))
        }
        None => (None, None),
    };
    let mut theta = theta0.clone();
    for k in 1..=n_iter {
        let mv = Move::draw(model, proposal, &theta, &mut streams);
        let decision = match (&mut proxy, &policy) {
            (Some(px), Some(pol)) if pol.is_due(k) => {
                *px = build_proxy(model, data, &theta)?;
                stats.refreshes += 1;
                let mut counter = EvalCounter::default();
                let current = model.full_log_lik(data, theta.as_slice(), &mut counter)?;
                ws.set_cached_full(Some(current));
                let d = exact_decision(model, data, &mut ws, &mv, 0, true)?;
                StopDecision {
                    evals: px.build_cost() + d.evals,
                    ..d
                }
            }
            _ => {
                let d = confidence_step(
                    model,
                    data,
                    config,
                    proxy.as_ref(),
                    &mut ws,
                    &mv,
                    &mut streams.subsample,
                )?;
                if proxy.is_some() && !d.proxy_used {
                    stats.proxy_fallbacks += 1;
                }
                d
            }
        };
        if decision.exhausted {
            stats.exhausted += 1;
        }
        if decision.accepted {
            theta = mv.theta_prime;
            if !decision.exhausted {
                ws.set_cached_full(None);
            }
        }
        proposal.adapt(k, decision.accepted);
        trace.push(theta.clone(), decision.accepted, decision.evals.min(2 * n as u64));
    }
    Ok((trace, stats))
}
