//! Proposal kernels.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Theta;

/// A Markov proposal q(θ'|θ).
pub trait Proposal {
    fn propose(&mut self, theta: &Theta, rng: &mut dyn RngCore) -> Theta;

    /// log q(θ|θ') − log q(θ'|θ).
    fn log_q_ratio(&self, _theta: &Theta, _theta_prime: &Theta) -> f64 {
        0.0
    }

    /// Called once per iteration (counted from 1) with the MH outcome.
    fn adapt(&mut self, _iteration: usize, _accepted: bool) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Adaptation {
    Off,
    /// Robbins–Monro on log scale towards `rate` during the first `horizon`
    /// iterations, frozen afterwards.
    TargetAcceptance {
        rate: f64,
        horizon: usize,
    },
}

impl Default for Adaptation {
    fn default() -> Self {
        Adaptation::TargetAcceptance {
            rate: 0.5,
            horizon: 1000,
        }
    }
}

/// Isotropic Gaussian random walk θ' = θ + s·η.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWalk {
    log_scale: f64,
    adaptation: Adaptation,
}

impl RandomWalk {
    pub fn new(scale: f64, adaptation: Adaptation) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid("proposal scale must be positive"));
        }
        if let Adaptation::TargetAcceptance { rate, .. } = adaptation {
            if !(rate > 0.0 && rate < 1.0) {
                return Err(Error::invalid("target acceptance must lie in (0, 1)"));
            }
        }
        Ok(Self {
            log_scale: scale.ln(),
            adaptation,
        })
    }

    /// Scale 1/√n, adapted towards 50% acceptance over 1000 iterations.
    pub fn for_data_size(n: usize) -> Self {
        Self {
            log_scale: -0.5 * (n.max(1) as f64).ln(),
            adaptation: Adaptation::default(),
        }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    pub fn adaptation(&self) -> Adaptation {
        self.adaptation
    }
}

impl Proposal for RandomWalk {
    fn propose(&mut self, theta: &Theta, rng: &mut dyn RngCore) -> Theta {
        let s = self.scale();
        theta.map(|v| {
            let z: f64 = StandardNormal.sample(rng);
            v + s * z
        })
    }

    fn adapt(&mut self, iteration: usize, accepted: bool) {
        if let Adaptation::TargetAcceptance { rate, horizon } = self.adaptation {
            if iteration <= horizon {
                let gain = (iteration as f64).powf(-0.6);
                self.log_scale += gain * (f64::from(u8::from(accepted)) - rate);
            }
        }
    }
}
