//! Delayed-acceptance MH with the likelihood factorised over contiguous
//! batches.

use rand::Rng;

use super::mh::Move;
use super::proposal::Proposal;
use super::trace::ChainTrace;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::rng::Streams;
use crate::Theta;

/// Contiguous index ranges of `n_batches` nearly equal batches.
fn batches(n: usize, n_batches: usize) -> Vec<std::ops::Range<usize>> {
    (0..n_batches)
        .map(|j| (j * n / n_batches)..((j + 1) * n / n_batches))
        .collect()
}

/// Stage j accepts with probability min(1, ρ_j), where
/// log ρ_j = (1/B)[log prior ratio + log q ratio] + Σ_{i in batch j} [ℓ_i(θ') − ℓ_i(θ)].
/// The chain moves only when every stage accepts; the first rejection stops
/// the iteration.
pub fn delayed_acceptance_run<P: Proposal + ?Sized>(
    model: &Model,
    data: &Dataset,
    n_batches: usize,
    proposal: &mut P,
    theta0: &Theta,
    n_iter: usize,
    seed: u64,
) -> Result<ChainTrace> {
    model.validate(data)?;
    model.check_theta(data, theta0.as_slice())?;
    let n = data.n();
    if n_batches == 0 || n_batches > n {
        return Err(Error::invalid("number of batches must lie in 1..=n"));
    }
    let ranges = batches(n, n_batches);
    let batch_sum = |theta: &[f64], r: &std::ops::Range<usize>| -> f64 {
        let mut s = 0.0;
        for i in r.clone() {
            s += model.log_lik_unchecked(data, i, theta);
        }
        s
    };
    let mut streams = Streams::new(seed);
    let mut trace = ChainTrace::new(n, seed, "delayed_acceptance");
    let mut theta = theta0.clone();
    let mut current: Vec<f64> = ranges.iter().map(|r| batch_sum(theta.as_slice(), r)).collect();
    let share = 1.0 / n_batches as f64;
    let mut proposed = vec![0.0; n_batches];
    for k in 1..=n_iter {
        let theta_prime = proposal.propose(&theta, &mut streams.proposal);
        let finite = theta_prime.iter().all(|v| v.is_finite());
        let mut evals = 0u64;
        let mut accepted = finite;
        if finite {
            for (j, r) in ranges.iter().enumerate() {
                let u: f64 = streams.uniform.random();
                let mv = Move::with_uniform(model, proposal, &theta, theta_prime.clone(), u);
                proposed[j] = batch_sum(theta_prime.as_slice(), r);
                evals += r.len() as u64;
                let stage = Move {
                    prior_q: mv.prior_q * share,
                    ..mv
                };
                if !stage.accepts(proposed[j] - current[j]) {
                    accepted = false;
                    break;
                }
            }
        } else {
            let _: f64 = streams.uniform.random();
        }
        if accepted {
            theta = theta_prime;
            current.copy_from_slice(&proposed);
        }
        proposal.adapt(k, accepted);
        trace.push(theta.clone(), accepted, evals);
    }
    Ok(trace)
}
