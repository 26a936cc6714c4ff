//! Austerity MH: MH decisions from a sequential Student t-test.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::confidence::{ConfidenceWorkspace, StopDecision};
use super::mh::Move;
use super::proposal::Proposal;
use super::trace::ChainTrace;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{EvalCounter, Model};
use crate::rng::Streams;
use crate::Theta;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AusterityConfig {
    /// p-value threshold ε.
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_t_init")]
    pub t_init: usize,
    /// Subsample growth factor between tests.
    #[serde(default = "default_growth")]
    pub growth: f64,
}

fn default_eps() -> f64 {
    0.05
}

fn default_t_init() -> usize {
    100
}

fn default_growth() -> f64 {
    2.0
}

impl Default for AusterityConfig {
    fn default() -> Self {
        Self {
            eps: default_eps(),
            t_init: default_t_init(),
            growth: default_growth(),
        }
    }
}

impl AusterityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid("austerity eps must lie in (0, 1)"));
        }
        if self.t_init < 2 {
            return Err(Error::invalid("austerity t_init must be at least 2"));
        }
        if !(self.growth > 1.0) {
            return Err(Error::invalid("austerity growth must exceed 1"));
        }
        Ok(())
    }
}

/// One Austerity decision; subsamples are drawn without replacement.
///
/// When every sampled ratio is identical before the data run out, the sign
/// of mean − ψ decides at once.
pub fn austerity_step(
    model: &Model,
    data: &Dataset,
    config: &AusterityConfig,
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
    let psi = mv.psi(n);
    let cached = ws.cached_full().is_some();
    let mut sample: Vec<usize> = Vec::new();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut target = config.t_init.min(n);
    loop {
        if target >= n {
            return exact(model, data, ws, mv);
        }
        // partial Fisher–Yates over the pool, as in the confidence workspace
        while sample.len() < target {
            let k = sample.len();
            let j = rng.random_range(k..n);
            ws.swap_pool(k, j);
            let id = ws.pool_at(k);
            let r = model.log_lik_unchecked(data, id, thp) - model.log_lik_unchecked(data, id, th);
            sum += r;
            sum_sq += r * r;
            sample.push(id);
        }
        let t = target as f64;
        let mean = sum / t;
        let var = ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0);
        let fpc = (1.0 - (t - 1.0) / (n as f64 - 1.0)).max(0.0);
        let se = (var / t).sqrt() * fpc.sqrt();
        let evals = if cached { target as u64 } else { 2 * target as u64 };
        let decided = if se == 0.0 {
            true
        } else {
            let stat = (mean - psi) / se;
            let dist = StudentsT::new(0.0, 1.0, t - 1.0).map_err(|e| Error::invalid(e.to_string()))?;
            let p = 2.0 * (1.0 - dist.cdf(stat.abs()));
            p < config.eps
        };
        if decided {
            return Ok(StopDecision {
                accepted: mean > psi,
                t_used: target,
                exhausted: false,
                evals,
                proxy_used: false,
            });
        }
        target = n.min((target as f64 * config.growth).ceil() as usize);
    }
}

fn exact(model: &Model, data: &Dataset, ws: &mut ConfidenceWorkspace, mv: &Move) -> Result<StopDecision> {
    let mut counter = EvalCounter::default();
    let current = match ws.cached_full() {
        Some(v) => v,
        None => model.full_log_lik(data, mv.theta.as_slice(), &mut counter)?,
    };
    let proposed = model.full_log_lik(data, mv.theta_prime.as_slice(), &mut counter)?;
    let accepted = mv.accepts(proposed - current);
    ws.set_cached_full(Some(if accepted { proposed } else { current }));
    Ok(StopDecision {
        accepted,
        t_used: data.n(),
        exhausted: true,
        evals: counter.0,
        proxy_used: false,
    })
}

pub fn austerity_run<P: Proposal + ?Sized>(
    model: &Model,
    data: &Dataset,
    config: &AusterityConfig,
    proposal: &mut P,
    theta0: &Theta,
    n_iter: usize,
    seed: u64,
) -> Result<ChainTrace> {
    model.validate(data)?;
    config.validate()?;
    model.check_theta(data, theta0.as_slice())?;
    let mut streams = Streams::new(seed);
    let mut trace = ChainTrace::new(data.n(), seed, "austerity");
    let mut ws = ConfidenceWorkspace::new(data.n());
    let mut theta = theta0.clone();
    for k in 1..=n_iter {
        let mv = Move::draw(model, proposal, &theta, &mut streams);
        let d = austerity_step(model, data, config, &mut ws, &mv, &mut streams.subsample)?;
        if d.accepted {
            theta = mv.theta_prime;
            if !d.exhausted {
                ws.set_cached_full(None);
            }
        }
        proposal.adapt(k, d.accepted);
        trace.push(theta.clone(), d.accepted, d.evals);
    }
    Ok(trace)
}
