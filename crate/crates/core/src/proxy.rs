//! Second-order Taylor proxies for per-datum log-likelihood ratios.
//!
//! Around a reference point θ★ each ℓ_i is replaced by
//! ℓ̂_i(θ) = ℓ_i(θ★) + g_iᵀ(θ−θ★) + ½(θ−θ★)ᵀH_i(θ−θ★) and the proxy for the
//! ratio is ℘_i(θ,θ') = ℓ̂_i(θ') − ℓ̂_i(θ). Its average over the data only
//! needs the aggregated gradient μ̂ and Hessian Ŝ, so it costs O(d²) and no
//! likelihood evaluation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{dot, Dataset};
use crate::error::{Error, Result};
use crate::models::{Model, RemainderNorm};
use crate::Theta;

const MAGIC: &[u8; 4] = b"TMHP";
const VERSION: u32 = 1;

/// How per-datum Hessians are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessLayout {
    /// H_i = c_i x_i x_iᵀ, only c_i is stored.
    RankOneCoefficient,
    /// Upper triangle, row major.
    Packed,
}

impl HessLayout {
    fn width(self, dim: usize) -> usize {
        match self {
            HessLayout::RankOneCoefficient => 1,
            HessLayout::Packed => dim * (dim + 1) / 2,
        }
    }
}

/// Fixed-width records (ℓ_i(θ★), g_i, H_i) keyed by datum index.
#[derive(Debug, Clone, PartialEq)]
pub struct PerDatumStore {
    dim: usize,
    layout: HessLayout,
    width: usize,
    records: Vec<f64>,
}

impl PerDatumStore {
    pub fn len(&self) -> usize {
        self.records.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn layout(&self) -> HessLayout {
        self.layout
    }

    #[inline]
    fn record(&self, i: usize) -> &[f64] {
        &self.records[i * self.width..(i + 1) * self.width]
    }

    #[inline]
    pub fn log_lik(&self, i: usize) -> f64 {
        self.record(i)[0]
    }

    #[inline]
    pub fn grad(&self, i: usize) -> &[f64] {
        &self.record(i)[1..1 + self.dim]
    }

    #[inline]
    fn hess_raw(&self, i: usize) -> &[f64] {
        &self.record(i)[1 + self.dim..]
    }

    /// Reconstructs H_i; rank-one layouts need the feature row.
    pub fn hess(&self, i: usize, data: &Dataset) -> DMatrix<f64> {
        let raw = self.hess_raw(i);
        let mut h = DMatrix::zeros(self.dim, self.dim);
        match self.layout {
            HessLayout::RankOneCoefficient => {
                let x = data.row(i);
                for j in 0..self.dim {
                    for k in 0..self.dim {
                        h[(j, k)] = raw[0] * x[j] * x[k];
                    }
                }
            }
            HessLayout::Packed => {
                let mut p = 0;
                for j in 0..self.dim {
                    for k in j..self.dim {
                        h[(j, k)] = raw[p];
                        h[(k, j)] = raw[p];
                        p += 1;
                    }
                }
            }
        }
        h
    }

    /// ½ hᵀH_i h.
    #[inline]
    fn half_quad(&self, i: usize, data: &Dataset, h: &[f64]) -> f64 {
        let raw = self.hess_raw(i);
        match self.layout {
            HessLayout::RankOneCoefficient => {
                let xh = dot(data.row(i), h);
                0.5 * raw[0] * xh * xh
            }
            HessLayout::Packed => {
                let mut s = 0.0;
                let mut p = 0;
                for j in 0..self.dim {
                    s += 0.5 * raw[p] * h[j] * h[j];
                    p += 1;
                    for k in j + 1..self.dim {
                        s += raw[p] * h[j] * h[k];
                        p += 1;
                    }
                }
                s
            }
        }
    }
}

/// A second-order Taylor proxy centred at θ★.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorProxy {
    theta_star: Theta,
    mu_hat: DVector<f64>,
    s_hat: DMatrix<f64>,
    mean_log_lik_star: f64,
    remainder_m: f64,
    norm: RemainderNorm,
    trust_radius: Option<f64>,
    store: PerDatumStore,
    build_cost: u64,
}

/// Computes per-datum values at θ★ and their aggregates.
pub fn build_proxy(model: &Model, data: &Dataset, theta_star: &Theta) -> Result<TaylorProxy> {
    if data.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    let star = theta_star.as_slice();
    model.check_theta(data, star)?;
    let dim = star.len();
    let n = data.n();
    let layout = if model.hess_coefficient(data, 0, star).is_some() {
        HessLayout::RankOneCoefficient
    } else {
        HessLayout::Packed
    };
    let width = 1 + dim + layout.width(dim);
    let mut records = Vec::with_capacity(n * width);
    let mut mu = DVector::zeros(dim);
    let mut s = DMatrix::zeros(dim, dim);
    let mut ll_sum = 0.0;
    let mut g = vec![0.0; dim];
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..n {
        let ll = model.log_lik_unchecked(data, i, star);
        g.iter_mut().for_each(|v| *v = 0.0);
        model.add_grad_unchecked(data, i, star, 1.0, &mut g);
        records.push(ll);
        records.extend_from_slice(&g);
        ll_sum += ll;
        for (m, gj) in mu.iter_mut().zip(&g) {
            *m += gj;
        }
        match layout {
            HessLayout::RankOneCoefficient => {
                let c = model.hess_coefficient(data, i, star).unwrap_or(0.0);
                records.push(c);
                let x = data.row(i);
                for j in 0..dim {
                    for k in 0..dim {
                        s[(j, k)] += c * x[j] * x[k];
                    }
                }
            }
            HessLayout::Packed => {
                h.fill(0.0);
                model.add_hess_unchecked(data, i, star, 1.0, &mut h);
                for j in 0..dim {
                    for k in j..dim {
                        records.push(h[(j, k)]);
                    }
                }
                s += &h;
            }
        }
    }
    let nf = n as f64;
    mu /= nf;
    s /= nf;
    // exact symmetry regardless of accumulation order
    let s = (&s + s.transpose()) * 0.5;
    let remainder_m = model.third_deriv_bound(data, star)?;
    let trust_radius = (!model.in_trust_region(star, &vec![f64::MAX; dim])).then_some(model.trust_radius);
    Ok(TaylorProxy {
        theta_star: theta_star.clone(),
        mu_hat: mu,
        s_hat: s,
        mean_log_lik_star: ll_sum / nf,
        remainder_m,
        norm: model.remainder_norm(),
        trust_radius,
        store: PerDatumStore {
            dim,
            layout,
            width,
            records,
        },
        build_cost: n as u64,
    })
}

/// Builds the proxy and persists its per-datum store at `path`.
pub fn build_proxy_persisted(model: &Model, data: &Dataset, theta_star: &Theta, path: &Path) -> Result<TaylorProxy> {
    let proxy = build_proxy(model, data, theta_star)?;
    proxy.write_store(path)?;
    Ok(proxy)
}

/// Differences θ − θ★, θ' − θ★ and θ' − θ for one proposal.
#[derive(Debug, Clone)]
pub struct ProxyPair<'a> {
    proxy: &'a TaylorProxy,
    from: Vec<f64>,
    to: Vec<f64>,
    step: Vec<f64>,
}

impl ProxyPair<'_> {
    /// ℘_i(θ, θ').
    #[inline]
    pub fn pair_i(&self, data: &Dataset, i: usize) -> f64 {
        let st = &self.proxy.store;
        dot(st.grad(i), &self.step) + (st.half_quad(i, data, &self.to) - st.half_quad(i, data, &self.from))
    }
}

impl TaylorProxy {
    pub fn theta_star(&self) -> &Theta {
        &self.theta_star
    }

    pub fn mu_hat(&self) -> &DVector<f64> {
        &self.mu_hat
    }

    pub fn s_hat(&self) -> &DMatrix<f64> {
        &self.s_hat
    }

    pub fn remainder_m(&self) -> f64 {
        self.remainder_m
    }

    /// Likelihood evaluations charged at construction.
    pub fn build_cost(&self) -> u64 {
        self.build_cost
    }

    pub fn store(&self) -> &PerDatumStore {
        &self.store
    }

    pub fn n(&self) -> usize {
        self.store.len()
    }

    /// Whether the remainder bound is valid at θ.
    pub fn covers(&self, theta: &[f64]) -> bool {
        match self.trust_radius {
            None => true,
            Some(r) => self.theta_star.iter().zip(theta).all(|(a, b)| (a - b).abs() <= r),
        }
    }

    pub fn pair<'a>(&'a self, theta: &[f64], theta_prime: &[f64]) -> ProxyPair<'a> {
        let star = self.theta_star.as_slice();
        ProxyPair {
            proxy: self,
            from: theta.iter().zip(star).map(|(a, b)| a - b).collect(),
            to: theta_prime.iter().zip(star).map(|(a, b)| a - b).collect(),
            step: theta_prime.iter().zip(theta).map(|(a, b)| a - b).collect(),
        }
    }

    /// ℘_i(θ, θ') read from the per-datum store.
    pub fn proxy_pair_i(&self, data: &Dataset, i: usize, theta: &[f64], theta_prime: &[f64]) -> f64 {
        self.pair(theta, theta_prime).pair_i(data, i)
    }

    /// (1/n) Σ_i ℘_i(θ, θ') = μ̂ᵀ(θ'−θ) + ½(θ'−θ)ᵀŜ(θ+θ'−2θ★).
    pub fn proxy_sum(&self, theta: &[f64], theta_prime: &[f64]) -> f64 {
        let dim = theta.len();
        let mut lin = 0.0;
        let mut quad = 0.0;
        for j in 0..dim {
            let step_j = theta_prime[j] - theta[j];
            lin += self.mu_hat[j] * step_j;
            let mut row = 0.0;
            for k in 0..dim {
                let sum_k = theta[k] + theta_prime[k] - 2.0 * self.theta_star[k];
                row += self.s_hat[(j, k)] * sum_k;
            }
            quad += step_j * row;
        }
        lin + 0.5 * quad
    }

    /// Uniform bound on |ℓ_i(θ') − ℓ_i(θ) − ℘_i(θ, θ')|.
    pub fn remainder_bound(&self, theta: &[f64], theta_prime: &[f64]) -> f64 {
        let star = self.theta_star.as_slice();
        let a: Vec<f64> = theta.iter().zip(star).map(|(x, s)| x - s).collect();
        let b: Vec<f64> = theta_prime.iter().zip(star).map(|(x, s)| x - s).collect();
        self.remainder_m / 6.0 * (self.norm.cube(&a) + self.norm.cube(&b))
    }

    /// b_i(θ) = ℓ̂_i(θ) − (M/6)‖θ−θ★‖³ ≤ ℓ_i(θ), from the store.
    #[inline]
    pub fn lower_bound_i(&self, data: &Dataset, i: usize, offset: &[f64], remainder: f64) -> f64 {
        let st = &self.store;
        st.log_lik(i) + dot(st.grad(i), offset) + st.half_quad(i, data, offset) - remainder
    }

    /// θ − θ★ and the per-datum remainder (M/6)‖θ−θ★‖³ used by `lower_bound_i`.
    pub fn lower_bound_terms(&self, theta: &[f64]) -> (Vec<f64>, f64) {
        let a: Vec<f64> = theta.iter().zip(self.theta_star.iter()).map(|(x, s)| x - s).collect();
        let r = self.remainder_m / 6.0 * self.norm.cube(&a);
        (a, r)
    }

    /// Σ_i b_i(θ) in O(d²).
    pub fn lower_bound_sum(&self, theta: &[f64]) -> f64 {
        let (_, r) = self.lower_bound_terms(theta);
        self.lower_bound_sum_with(theta, r)
    }

    /// Σ_i [ℓ̂_i(θ) − remainder] in O(d²), for a caller-supplied remainder.
    pub fn lower_bound_sum_with(&self, theta: &[f64], remainder: f64) -> f64 {
        let a: Vec<f64> = theta.iter().zip(self.theta_star.iter()).map(|(x, s)| x - s).collect();
        let av = DVector::from_column_slice(&a);
        let n = self.n() as f64;
        n * (self.mean_log_lik_star + self.mu_hat.dot(&av) + 0.5 * av.dot(&(&self.s_hat * &av)) - remainder)
    }

    pub fn remainder_norm(&self) -> RemainderNorm {
        self.norm
    }

    /// Writes the per-datum store: magic, version, n, d, layout, θ★, records.
    pub fn write_store(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut bytes = Vec::with_capacity(64 + self.store.records.len() * 8);
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&VERSION.to_le_bytes());
        bytes.extend_from_slice(&(self.n() as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.store.dim as u64).to_le_bytes());
        bytes.push(match self.store.layout {
            HessLayout::RankOneCoefficient => 0,
            HessLayout::Packed => 1,
        });
        for v in self.theta_star.iter().chain(&self.store.records) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Rebuilds a proxy from a persisted store; aggregates are recomputed
    /// from the records and the remainder constant from the model.
    pub fn load_store(model: &Model, data: &Dataset, path: &Path) -> Result<TaylorProxy> {
        let bad = |m: &str| Error::Store {
            path: path.to_owned(),
            message: m.to_owned(),
        };
        let mut bytes = Vec::new();
        BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() < 25 || &bytes[..4] != MAGIC {
            return Err(bad("bad header"));
        }
        if u32::from_le_bytes(bytes[4..8].try_into().unwrap()) != VERSION {
            return Err(bad("unsupported version"));
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let dim = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
        let layout = match bytes[24] {
            0 => HessLayout::RankOneCoefficient,
            1 => HessLayout::Packed,
            _ => return Err(bad("unknown hessian layout")),
        };
        if n != data.n() || dim != model.dim(data) {
            return Err(bad("store does not match the dataset"));
        }
        let width = 1 + dim + layout.width(dim);
        let body = &bytes[25..];
        if body.len() != (dim + n * width) * 8 {
            return Err(bad("truncated records"));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let theta_star = Theta::from_column_slice(&values[..dim]);
        let store = PerDatumStore {
            dim,
            layout,
            width,
            records: values[dim..].to_vec(),
        };
        let mut mu = DVector::zeros(dim);
        let mut s = DMatrix::zeros(dim, dim);
        let mut ll_sum = 0.0;
        for i in 0..n {
            ll_sum += store.log_lik(i);
            for (m, g) in mu.iter_mut().zip(store.grad(i)) {
                *m += g;
            }
            s += store.hess(i, data);
        }
        let nf = n as f64;
        mu /= nf;
        s /= nf;
        let s = (&s + s.transpose()) * 0.5;
        let star = theta_star.as_slice();
        let remainder_m = model.third_deriv_bound(data, star)?;
        let trust_radius = (!model.in_trust_region(star, &vec![f64::MAX; dim])).then_some(model.trust_radius);
        Ok(TaylorProxy {
            theta_star,
            mu_hat: mu,
            s_hat: s,
            mean_log_lik_star: ll_sum / nf,
            remainder_m,
            norm: model.remainder_norm(),
            trust_radius,
            store,
            build_cost: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ProxyPolicy {
    /// One proxy, built at the MAP, kept for the whole run.
    SingleAtMap,
    /// Re-centre θ★ at the current state every `alpha` iterations.
    DropEveryAlpha { alpha: usize },
}

impl Default for ProxyPolicy {
    fn default() -> Self {
        ProxyPolicy::DropEveryAlpha { alpha: 10 }
    }
}

impl ProxyPolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProxyPolicy::DropEveryAlpha { alpha: 0 } => Err(Error::invalid("alpha must be >= 1")),
            _ => Ok(()),
        }
    }

    /// Iterations are counted from 1.
    pub fn is_due(&self, iteration: usize) -> bool {
        match *self {
            ProxyPolicy::SingleAtMap => false,
            ProxyPolicy::DropEveryAlpha { alpha } => alpha > 0 && iteration.is_multiple_of(alpha),
        }
    }
}

/// Rebuilds the proxy at `current` when the policy says so. The flag tells
/// whether a rebuild happened.
pub fn refresh_if_due(
    policy: &ProxyPolicy,
    proxy: TaylorProxy,
    iteration: usize,
    current: &Theta,
    model: &Model,
    data: &Dataset,
) -> Result<(TaylorProxy, bool)> {
    if policy.is_due(iteration) {
        Ok((build_proxy(model, data, current)?, true))
    } else {
        Ok((proxy, false))
    }
}
