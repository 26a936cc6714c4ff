//! Subsampling Metropolis-Hastings for tall datasets.
//!
//! The centerpiece is the confidence sampler, which decides each MH
//! acceptance from a growing random subsample and stops as soon as an
//! empirical Bernstein bound certifies the decision. Second-order Taylor
//! expansions of the per-datum log-likelihoods act as control variates
//! (the "proxy") and shrink both the variance and the range that enter the
//! bound, which is what makes sub-linear per-iteration cost possible.
//!
//! Exact and approximate baselines are provided for comparison: vanilla MH,
//! Firefly MH, the Rhee–Glynn pseudo-marginal estimator, Austerity MH, SGLD,
//! delayed acceptance and a naive-subsampling demonstrator. Every sampler
//! records the number of likelihood evaluations spent per iteration.
//!
//! ```
//! use tallmh::data::{generate, SyntheticKind, SyntheticSpec};
//! use tallmh::models::{Family, Model, Prior};
//! use tallmh::samplers::find_map;
//!
//! let data = generate(&SyntheticSpec::new(SyntheticKind::Gaussian1d, 500, 7)).unwrap();
//! let model = Model::new(Family::GaussianLocationScale, Prior::Flat);
//! let map = find_map(&model, &data, &model.default_start(&data), 1e-8).unwrap();
//! assert!(map.converged);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod models;
pub mod proxy;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};

/// A parameter point.
pub type Theta = nalgebra::DVector<f64>;
