//! Vanilla Metropolis–Hastings and the pieces shared by every MH variant.

use rand::Rng;

use super::proposal::Proposal;
use super::trace::ChainTrace;
use crate::data::Dataset;
use crate::error::Result;
use crate::models::{EvalCounter, Model};
use crate::rng::Streams;
use crate::Theta;

/// A proposed move with its uniform and the non-likelihood part of the
/// log acceptance ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct Move {
    pub theta: Theta,
    pub theta_prime: Theta,
    pub log_u: f64,
    /// log p(θ') − log p(θ) + log q(θ|θ') − log q(θ'|θ).
    pub prior_q: f64,
}

impl Move {
    /// Draws θ' from the proposal stream and u from the uniform stream.
    pub fn draw<P: Proposal + ?Sized>(model: &Model, proposal: &mut P, theta: &Theta, streams: &mut Streams) -> Self {
        let theta_prime = proposal.propose(theta, &mut streams.proposal);
        let u: f64 = streams.uniform.random();
        Self::with_uniform(model, proposal, theta, theta_prime, u)
    }

    pub fn with_uniform<P: Proposal + ?Sized>(
        model: &Model,
        proposal: &P,
        theta: &Theta,
        theta_prime: Theta,
        u: f64,
    ) -> Self {
        let lq = proposal.log_q_ratio(theta, &theta_prime);
        let prior_q = (model.log_prior(theta_prime.as_slice()) - model.log_prior(theta.as_slice())) + lq;
        Self {
            theta: theta.clone(),
            theta_prime,
            log_u: u.ln(),
            prior_q,
        }
    }

    /// ψ(u, θ, θ') = (1/n) log[u p(θ)q(θ'|θ) / (p(θ')q(θ|θ'))].
    pub fn psi(&self, n: usize) -> f64 {
        (self.log_u - self.prior_q) / n as f64
    }

    /// Exact MH test given Σℓ_i(θ') − Σℓ_i(θ).
    pub fn accepts(&self, log_lik_diff: f64) -> bool {
        self.log_u < log_lik_diff + self.prior_q
    }
}

/// Random-walk MH on the full posterior. The full log-likelihood of the
/// current state is cached, so each iteration costs n evaluations.
pub fn mh_run<P: Proposal + ?Sized>(
    model: &Model,
    data: &Dataset,
    proposal: &mut P,
    theta0: &Theta,
    n_iter: usize,
    seed: u64,
) -> Result<ChainTrace> {
    model.validate(data)?;
    let mut streams = Streams::new(seed);
    let mut trace = ChainTrace::new(data.n(), seed, "mh");
    let mut setup = EvalCounter::default();
    let mut theta = theta0.clone();
    let mut current = model.full_log_lik(data, theta.as_slice(), &mut setup)?;
    for k in 1..=n_iter {
        let mv = Move::draw(model, proposal, &theta, &mut streams);
        let mut counter = EvalCounter::default();
        let accepted = match model.full_log_lik(data, mv.theta_prime.as_slice(), &mut counter) {
            Ok(proposed) => {
                let acc = mv.accepts(proposed - current);
                if acc {
                    current = proposed;
                }
                acc
            }
            // non-finite proposals have zero target density
            Err(_) => false,
        };
        if accepted {
            theta = mv.theta_prime;
        }
        proposal.adapt(k, accepted);
        trace.push(theta.clone(), accepted, counter.0);
    }
    Ok(trace)
}
