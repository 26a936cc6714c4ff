//! Exact and approximate MH samplers for tall data.
//!
//! All chains draw their proposals, uniforms, subsamples and noise from the
//! per-purpose streams of [`crate::rng::Streams`], so samplers that make the
//! same decisions consume the same random numbers.

mod austerity;
mod confidence;
mod delayed;
mod firefly;
mod map;
mod mh;
mod naive;
mod proposal;
mod pseudo_marginal;
mod sgld;
mod trace;

pub use austerity::{austerity_run, austerity_step, AusterityConfig};
pub use confidence::{
    bernstein_bound, confidence_run, confidence_step, ConfidenceConfig, ConfidenceStats, ConfidenceWorkspace,
    DeltaSchedule, ProxySetup, Sampling, StopDecision,
};
pub use delayed::delayed_acceptance_run;
pub use firefly::{firefly_run, FireflyConfig, FireflySampler, FireflyTarget, TaylorBoundTarget, TaylorCtx};
pub use map::{find_map, MapResult};
pub use mh::{mh_run, Move};
pub use naive::{grid_variance, naive_subsample_demo, NaiveEstimator, NaiveRow};
pub use proposal::{Adaptation, Proposal, RandomWalk};
pub use pseudo_marginal::{
    firefly_pm_variance, rhee_glynn_estimate, rhee_glynn_log_estimate, rhee_glynn_run, rhee_glynn_variance_lower_bound,
    PmVariance, RheeGlynnConfig,
};
pub use sgld::{sgld_run, SgldConfig, StepSchedule};
pub use trace::{read_trace, trace_sidecar_path, write_trace, ChainTrace, TraceMeta};
