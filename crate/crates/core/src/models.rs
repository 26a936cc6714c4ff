//! Likelihood families with hand-coded derivatives and third-derivative
//! bounds.
//!
//! Three families are supported:
//!
//! * `gaussian_location_scale`: x_i ~ N(μ, σ²), parameter (μ, log σ), one
//!   scalar feature per record.
//! * `logistic`: ℓ_i(θ) = φ(t_i x_iᵀθ) with φ(z) = −log(1 + e^{−z}) and
//!   labels t_i ∈ {−1, +1}.
//! * `gamma`: y_i ~ Γ(κ, e^{x_iᵀθ}/κ) with known shape κ. The per-datum
//!   log-likelihood drops the θ-free term (κ−1)log y_i + κ log κ − log Γ(κ),
//!   so ℓ_i(θ) = −κ y_i e^{−x_iᵀθ} − κ x_iᵀθ. The dropped term is identical
//!   for every evaluation and cancels in all ratios.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{dot, Dataset};
use crate::error::{Error, Result};
use crate::Theta;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    GaussianLocationScale,
    Logistic,
    Gamma { kappa: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "prior", rename_all = "snake_case")]
pub enum Prior {
    Flat,
    /// Independent Cauchy densities per coordinate.
    Cauchy {
        location: Vec<f64>,
        scale: Vec<f64>,
    },
}

impl Prior {
    /// Cauchy(0, 2.5) on every coefficient, Cauchy(0, 10) on the intercept
    /// (coordinate 0) when there is one.
    pub fn cauchy_default(dim: usize, intercept: bool) -> Self {
        let mut scale = vec![2.5; dim];
        if intercept && dim > 0 {
            scale[0] = 10.0;
        }
        Prior::Cauchy {
            location: vec![0.0; dim],
            scale,
        }
    }
}

/// Norm in which the Taylor remainder of a family is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemainderNorm {
    /// M bounds the third directional derivative along unit Euclidean
    /// directions; remainder (M/6)‖h‖₂³.
    Euclidean,
    /// M bounds every third partial derivative; remainder (M/6)‖h‖₁³.
    L1,
}

impl RemainderNorm {
    pub fn cube(self, h: &[f64]) -> f64 {
        let norm = match self {
            RemainderNorm::Euclidean => h.iter().map(|v| v * v).sum::<f64>().sqrt(),
            RemainderNorm::L1 => h.iter().map(|v| v.abs()).sum::<f64>(),
        };
        norm * norm * norm
    }
}

/// Counts per-datum likelihood evaluations.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct EvalCounter(pub u64);

impl EvalCounter {
    pub fn add(&mut self, k: usize) {
        self.0 += k as u64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    #[serde(flatten)]
    pub family: Family,
    #[serde(flatten)]
    pub prior: Prior,
    /// Half-width of the ‖θ − θ★‖∞ box on which the Gaussian and gamma
    /// third-derivative bounds are valid.
    #[serde(default = "default_trust_radius")]
    pub trust_radius: f64,
}

fn default_trust_radius() -> f64 {
    1.0
}

#[inline]
fn log_sigmoid(z: f64) -> f64 {
    // φ(z) = −log(1 + e^{−z})
    if z > 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// φ'(z) = σ(−z)
#[inline]
pub fn logistic_phi1(z: f64) -> f64 {
    sigmoid(-z)
}

/// φ''(z) = −σ(z)σ(−z)
#[inline]
pub fn logistic_phi2(z: f64) -> f64 {
    -sigmoid(z) * sigmoid(-z)
}

/// φ'''(z) = σ(z)σ(−z)(σ(z) − σ(−z))
#[inline]
pub fn logistic_phi3(z: f64) -> f64 {
    let (p, q) = (sigmoid(z), sigmoid(-z));
    p * q * (p - q)
}

impl Model {
    pub fn new(family: Family, prior: Prior) -> Self {
        Self {
            family,
            prior,
            trust_radius: default_trust_radius(),
        }
    }

    pub fn with_trust_radius(mut self, r: f64) -> Self {
        self.trust_radius = r;
        self
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::GaussianLocationScale => "gaussian_location_scale",
            Family::Logistic => "logistic",
            Family::Gamma { .. } => "gamma",
        }
    }

    /// Parameter dimension for `data`.
    pub fn dim(&self, data: &Dataset) -> usize {
        match self.family {
            Family::GaussianLocationScale => 2,
            _ => data.d(),
        }
    }

    /// Checks that `data` can be modelled by this family.
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        if data.n() == 0 {
            return Err(Error::EmptyDataset);
        }
        match self.family {
            Family::GaussianLocationScale => {
                if data.d() != 1 {
                    return Err(Error::invalid(
                        "gaussian_location_scale needs exactly one feature per record",
                    ));
                }
            }
            Family::Logistic => {
                let labels = data
                    .responses()
                    .ok_or_else(|| Error::invalid("logistic model needs labels"))?;
                if labels.iter().any(|&t| t != 1.0 && t != -1.0) {
                    return Err(Error::invalid("logistic labels must be -1 or +1"));
                }
            }
            Family::Gamma { kappa } => {
                if !(kappa > 0.0) || !kappa.is_finite() {
                    return Err(Error::invalid("gamma model needs kappa > 0"));
                }
                let y = data
                    .responses()
                    .ok_or_else(|| Error::invalid("gamma model needs responses"))?;
                if y.iter().any(|&v| v < 0.0) {
                    return Err(Error::invalid("gamma responses must be nonnegative"));
                }
            }
        }
        if let Prior::Cauchy { location, scale } = &self.prior {
            let dim = self.dim(data);
            if location.len() != dim || scale.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: location.len().min(scale.len()),
                });
            }
            if scale.iter().any(|&s| !(s > 0.0)) {
                return Err(Error::invalid("Cauchy scales must be positive"));
            }
        }
        if !(self.trust_radius > 0.0) {
            return Err(Error::invalid("trust radius must be positive"));
        }
        Ok(())
    }

    pub fn check_theta(&self, data: &Dataset, theta: &[f64]) -> Result<()> {
        let dim = self.dim(data);
        if theta.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: theta.len(),
            });
        }
        if let Some(j) = theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteParameter(j));
        }
        Ok(())
    }

    fn check_index(&self, data: &Dataset, i: usize) -> Result<()> {
        if i >= data.n() {
            return Err(Error::invalid(format!("datum index {i} out of range {}", data.n())));
        }
        Ok(())
    }

    /// Starting point for optimisation: zeros, or (mean, log sd) for the
    /// Gaussian family.
    pub fn default_start(&self, data: &Dataset) -> Theta {
        match self.family {
            Family::GaussianLocationScale => {
                let n = data.n() as f64;
                let m = data.features().iter().sum::<f64>() / n;
                let v = data.features().iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
                Theta::from_vec(vec![m, 0.5 * v.max(1e-12).ln()])
            }
            _ => Theta::zeros(data.d()),
        }
    }

    /// ℓ_i(θ) without input validation.
    #[inline]
    pub fn log_lik_unchecked(&self, data: &Dataset, i: usize, theta: &[f64]) -> f64 {
        match self.family {
            Family::GaussianLocationScale => {
                let r = data.row(i)[0] - theta[0];
                let w = (-2.0 * theta[1]).exp();
                -HALF_LN_2PI - theta[1] - 0.5 * r * r * w
            }
            Family::Logistic => {
                let t = data.response(i).unwrap_or(1.0);
                log_sigmoid(t * dot(data.row(i), theta))
            }
            Family::Gamma { kappa } => {
                let y = data.response(i).unwrap_or(0.0);
                let eta = dot(data.row(i), theta);
                -kappa * y * (-eta).exp() - kappa * eta
            }
        }
    }

    pub fn log_lik_i(&self, data: &Dataset, i: usize, theta: &[f64]) -> Result<f64> {
        self.check_index(data, i)?;
        self.check_theta(data, theta)?;
        Ok(self.log_lik_unchecked(data, i, theta))
    }

    /// Adds ∇ℓ_i(θ) scaled by `scale` into `out`.
    #[inline]
    pub fn add_grad_unchecked(&self, data: &Dataset, i: usize, theta: &[f64], scale: f64, out: &mut [f64]) {
        match self.family {
            Family::GaussianLocationScale => {
                let r = data.row(i)[0] - theta[0];
                let w = (-2.0 * theta[1]).exp();
                out[0] += scale * r * w;
                out[1] += scale * (r * r * w - 1.0);
            }
            Family::Logistic => {
                let t = data.response(i).unwrap_or(1.0);
                let x = data.row(i);
                let c = scale * logistic_phi1(t * dot(x, theta)) * t;
                for (o, xj) in out.iter_mut().zip(x) {
                    *o += c * xj;
                }
            }
            Family::Gamma { kappa } => {
                let y = data.response(i).unwrap_or(0.0);
                let x = data.row(i);
                let c = scale * kappa * (y * (-dot(x, theta)).exp() - 1.0);
                for (o, xj) in out.iter_mut().zip(x) {
                    *o += c * xj;
                }
            }
        }
    }

    pub fn grad_log_lik_i(&self, data: &Dataset, i: usize, theta: &[f64]) -> Result<DVector<f64>> {
        self.check_index(data, i)?;
        self.check_theta(data, theta)?;
        let mut g = DVector::zeros(theta.len());
        self.add_grad_unchecked(data, i, theta, 1.0, g.as_mut_slice());
        Ok(g)
    }

    /// For the regressions H_i = c_i x_i x_iᵀ; returns c_i. `None` for the
    /// Gaussian family, whose Hessian is not rank one.
    #[inline]
    pub fn hess_coefficient(&self, data: &Dataset, i: usize, theta: &[f64]) -> Option<f64> {
        match self.family {
            Family::GaussianLocationScale => None,
            Family::Logistic => {
                let t = data.response(i).unwrap_or(1.0);
                Some(logistic_phi2(t * dot(data.row(i), theta)))
            }
            Family::Gamma { kappa } => {
                let y = data.response(i).unwrap_or(0.0);
                Some(-kappa * y * (-dot(data.row(i), theta)).exp())
            }
        }
    }

    /// Adds ∇²ℓ_i(θ) scaled by `scale` into `out`.
    pub fn add_hess_unchecked(&self, data: &Dataset, i: usize, theta: &[f64], scale: f64, out: &mut DMatrix<f64>) {
        match self.hess_coefficient(data, i, theta) {
            Some(c) => {
                let x = data.row(i);
                let c = scale * c;
                for j in 0..x.len() {
                    for k in 0..x.len() {
                        out[(j, k)] += c * x[j] * x[k];
                    }
                }
            }
            None => {
                let r = data.row(i)[0] - theta[0];
                let w = (-2.0 * theta[1]).exp();
                out[(0, 0)] -= scale * w;
                out[(0, 1)] -= scale * 2.0 * r * w;
                out[(1, 0)] -= scale * 2.0 * r * w;
                out[(1, 1)] -= scale * 2.0 * r * r * w;
            }
        }
    }

    pub fn hess_log_lik_i(&self, data: &Dataset, i: usize, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_index(data, i)?;
        self.check_theta(data, theta)?;
        let dim = theta.len();
        let mut h = DMatrix::zeros(dim, dim);
        self.add_hess_unchecked(data, i, theta, 1.0, &mut h);
        Ok(h)
    }

    pub fn remainder_norm(&self) -> RemainderNorm {
        match self.family {
            Family::Logistic => RemainderNorm::Euclidean,
            _ => RemainderNorm::L1,
        }
    }

    /// Whether the third-derivative bound computed at `theta_ref` covers
    /// `theta`. The logistic bound holds globally.
    pub fn in_trust_region(&self, theta_ref: &[f64], theta: &[f64]) -> bool {
        match self.family {
            Family::Logistic => true,
            _ => theta_ref
                .iter()
                .zip(theta)
                .all(|(a, b)| (a - b).abs() <= self.trust_radius),
        }
    }

    /// Constant M bounding the third derivatives of every ℓ_i.
    ///
    /// * logistic: M = ¼ max‖x_i‖₂³ bounds the third directional derivative
    ///   globally, since |φ'''| ≤ ¼.
    /// * gamma: M = κ max|y| exp(−m) max‖x_i‖∞³ bounds every third partial,
    ///   where m = min_i (x_iᵀθ_ref − r‖x_i‖₁) ≤ min_i x_iᵀθ on the trust
    ///   box of radius r.
    /// * gaussian: exact supremum of the third partials over the trust box.
    pub fn third_deriv_bound(&self, data: &Dataset, theta_ref: &[f64]) -> Result<f64> {
        if data.n() == 0 {
            return Err(Error::EmptyDataset);
        }
        self.check_theta(data, theta_ref)?;
        let r = self.trust_radius;
        Ok(match self.family {
            Family::Logistic => 0.25 * data.max_l2_norm().powi(3),
            Family::Gamma { kappa } => {
                let y_max = data.max_abs_response();
                if y_max == 0.0 {
                    return Ok(0.0);
                }
                let m = (0..data.n())
                    .map(|i| {
                        let x = data.row(i);
                        dot(x, theta_ref) - r * x.iter().map(|v| v.abs()).sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                kappa * y_max * (-m).exp() * data.max_inf_norm().powi(3)
            }
            Family::GaussianLocationScale => {
                // third partials: ∂μμs = 2w, ∂μss = 4(x−μ)w, ∂sss = 4(x−μ)²w,
                // w = e^{−2s}; each is maximised at a corner of the box
                let a = data
                    .features()
                    .iter()
                    .map(|x| (x - theta_ref[0]).abs())
                    .fold(0.0f64, f64::max)
                    + r;
                let w = (-2.0 * (theta_ref[1] - r)).exp();
                (2.0 * w).max(4.0 * a * w).max(4.0 * a * a * w)
            }
        })
    }

    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        match &self.prior {
            Prior::Flat => 0.0,
            Prior::Cauchy { location, scale } => theta
                .iter()
                .zip(location.iter().zip(scale))
                .map(|(t, (m, s))| {
                    let u = (t - m) / s;
                    -(std::f64::consts::PI * s).ln() - u.mul_add(u, 1.0).ln()
                })
                .sum(),
        }
    }

    pub fn add_grad_log_prior(&self, theta: &[f64], out: &mut [f64]) {
        if let Prior::Cauchy { location, scale } = &self.prior {
            for j in 0..theta.len() {
                let u = theta[j] - location[j];
                out[j] += -2.0 * u / (scale[j] * scale[j] + u * u);
            }
        }
    }

    pub fn add_hess_log_prior(&self, theta: &[f64], out: &mut DMatrix<f64>) {
        if let Prior::Cauchy { location, scale } = &self.prior {
            for j in 0..theta.len() {
                let u = theta[j] - location[j];
                let s2 = scale[j] * scale[j];
                let den = s2 + u * u;
                out[(j, j)] += -2.0 * (s2 - u * u) / (den * den);
            }
        }
    }

    /// Σ_i ℓ_i(θ) in index order; charges n evaluations to `counter`.
    pub fn full_log_lik(&self, data: &Dataset, theta: &[f64], counter: &mut EvalCounter) -> Result<f64> {
        self.check_theta(data, theta)?;
        counter.add(data.n());
        let mut s = 0.0;
        for i in 0..data.n() {
            s += self.log_lik_unchecked(data, i, theta);
        }
        Ok(s)
    }

    /// log prior + Σ ℓ_i, its gradient and Hessian at θ.
    pub fn log_posterior_derivatives(&self, data: &Dataset, theta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let dim = theta.len();
        let mut value = self.log_prior(theta);
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..data.n() {
            value += self.log_lik_unchecked(data, i, theta);
            self.add_grad_unchecked(data, i, theta, 1.0, g.as_mut_slice());
            self.add_hess_unchecked(data, i, theta, 1.0, &mut h);
        }
        self.add_grad_log_prior(theta, g.as_mut_slice());
        self.add_hess_log_prior(theta, &mut h);
        (value, g, h)
    }

    pub fn log_posterior(&self, data: &Dataset, theta: &[f64]) -> f64 {
        self.log_prior(theta)
            + (0..data.n())
                .map(|i| self.log_lik_unchecked(data, i, theta))
                .sum::<f64>()
    }

    /// Second-order Taylor lower bound b_i(θ) ≤ ℓ_i(θ) around `bound.theta_star`.
    pub fn firefly_lower_bound_i(&self, data: &Dataset, i: usize, theta: &[f64], bound: &BoundSpec) -> Result<f64> {
        self.check_index(data, i)?;
        self.check_theta(data, theta)?;
        let star = bound.theta_star.as_slice();
        if !self.in_trust_region(star, theta) {
            return Err(Error::OutsideTrustRegion {
                radius: self.trust_radius,
            });
        }
        let h: Vec<f64> = theta.iter().zip(star).map(|(a, b)| a - b).collect();
        let l0 = self.log_lik_unchecked(data, i, star);
        let mut g = vec![0.0; h.len()];
        self.add_grad_unchecked(data, i, star, 1.0, &mut g);
        let mut hm = DMatrix::zeros(h.len(), h.len());
        self.add_hess_unchecked(data, i, star, 1.0, &mut hm);
        let hv = DVector::from_column_slice(&h);
        let quad = hv.dot(&(&hm * &hv));
        Ok(l0 + dot(&g, &h) + 0.5 * quad - bound.remainder_m / 6.0 * self.remainder_norm().cube(&h))
    }
}

/// Expansion point and remainder constant of a Taylor lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSpec {
    pub theta_star: Theta,
    pub remainder_m: f64,
}

impl BoundSpec {
    pub fn new(model: &Model, data: &Dataset, theta_star: Theta) -> Result<Self> {
        let remainder_m = model.third_deriv_bound(data, theta_star.as_slice())?;
        Ok(Self {
            theta_star,
            remainder_m,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, SyntheticKind, SyntheticSpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian(xs: &[f64]) -> (Model, Dataset) {
        (
            Model::new(Family::GaussianLocationScale, Prior::Flat),
            Dataset::new(xs.to_vec(), 1, None).unwrap(),
        )
    }

    fn logistic_data(seed: u64) -> Dataset {
        let mut spec = SyntheticSpec::new(SyntheticKind::LogisticTwoGaussians, 50, seed);
        spec.class_mean = vec![0.5, -0.3, 0.8];
        generate(&spec).unwrap()
    }

    fn gamma_data(seed: u64) -> Dataset {
        generate(&SyntheticSpec::new(SyntheticKind::GammaFromCovariates, 50, seed)).unwrap()
    }

    // Independent scalar evaluation of the dropped-constant gamma log-likelihood.
    fn gamma_scalar(kappa: f64, y: f64, eta: f64) -> f64 {
        -kappa * y / eta.exp() - kappa * eta
    }

    #[test]
    fn log_lik_examples() {
        let (m, d) = gaussian(&[0.0]);
        assert_relative_eq!(
            m.log_lik_i(&d, 0, &[0.0, 0.0]).unwrap(),
            -0.5 * (2.0 * std::f64::consts::PI).ln(),
            epsilon = 1e-15
        );

        let m = Model::new(Family::Logistic, Prior::Flat);
        let d = Dataset::new(vec![1.0, -1.0], 2, Some(vec![1.0])).unwrap();
        assert_relative_eq!(m.log_lik_i(&d, 0, &[0.3, 0.3]).unwrap(), -(2f64.ln()), epsilon = 1e-15);

        let m = Model::new(Family::Gamma { kappa: 2.0 }, Prior::Flat);
        let d = Dataset::new(vec![1.0, 2.0], 2, Some(vec![1.0])).unwrap();
        let v = m.log_lik_i(&d, 0, &[2.0, -1.0]).unwrap();
        assert_eq!(v, -2.0);
        assert_eq!(v, gamma_scalar(2.0, 1.0, 0.0));
    }

    #[test]
    fn input_errors() {
        let (m, d) = gaussian(&[0.0, 1.0]);
        assert!(matches!(
            m.log_lik_i(&d, 0, &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            m.log_lik_i(&d, 0, &[f64::NAN, 0.0]),
            Err(Error::NonFiniteParameter(0))
        ));
        assert!(m.log_lik_i(&d, 2, &[0.0, 0.0]).is_err());
        let g = Model::new(Family::Gamma { kappa: -1.0 }, Prior::Flat);
        assert!(g.validate(&gamma_data(1)).is_err());
        let neg = Dataset::new(vec![1.0], 1, Some(vec![-2.0])).unwrap();
        assert!(Model::new(Family::Gamma { kappa: 1.0 }, Prior::Flat)
            .validate(&neg)
            .is_err());
    }

    #[test]
    fn gradient_examples() {
        let m = Model::new(Family::Logistic, Prior::Flat);
        let d = Dataset::new(vec![2.0, -4.0], 2, Some(vec![-1.0])).unwrap();
        let g = m.grad_log_lik_i(&d, 0, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(g[0], 0.5 * -2.0);
        assert_relative_eq!(g[1], 0.5 * 4.0);

        let m = Model::new(Family::Gamma { kappa: 1.5 }, Prior::Flat);
        // y e^{−xᵀθ} = 1 with xᵀθ = ln 3, y = 3
        let d = Dataset::new(vec![1.0, 0.5], 2, Some(vec![3.0])).unwrap();
        let theta = [3f64.ln(), 0.0];
        let g = m.grad_log_lik_i(&d, 0, &theta).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn hessian_examples() {
        let m = Model::new(Family::Logistic, Prior::Flat);
        let d = Dataset::new(vec![1.0, 2.0, -0.5], 3, Some(vec![1.0])).unwrap();
        let h = m.hess_log_lik_i(&d, 0, &[0.2, -0.1, 0.4]).unwrap();
        assert_eq!(h, h.transpose());
        let eig = h.symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|&e| e <= 1e-15));

        let m = Model::new(Family::Gamma { kappa: 2.0 }, Prior::Flat);
        let d = Dataset::new(vec![1.0, 2.0], 2, Some(vec![0.0])).unwrap();
        let h = m.hess_log_lik_i(&d, 0, &[0.3, 0.1]).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    fn fd_grad(m: &Model, d: &Dataset, i: usize, theta: &[f64], step: f64) -> Vec<f64> {
        (0..theta.len())
            .map(|j| {
                let mut p = theta.to_vec();
                let mut q = theta.to_vec();
                p[j] += step;
                q[j] -= step;
                (m.log_lik_unchecked(d, i, &p) - m.log_lik_unchecked(d, i, &q)) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn gaussian_derivatives_match_finite_differences() {
        let (m, d) = gaussian(&[1.0]);
        let g = m.grad_log_lik_i(&d, 0, &[0.0, 0.0]).unwrap();
        let fd = fd_grad(&m, &d, 0, &[0.0, 0.0], 1e-5);
        let err = ((g[0] - fd[0]).powi(2) + (g[1] - fd[1]).powi(2)).sqrt();
        assert!(err / g.norm() < 1e-6, "{g} {fd:?}");

        let (m, d) = gaussian(&[2.0]);
        let h = m.hess_log_lik_i(&d, 0, &[0.0, 0.0]).unwrap();
        for j in 0..2 {
            let mut p = vec![0.0, 0.0];
            let mut q = vec![0.0, 0.0];
            p[j] += 1e-5;
            q[j] -= 1e-5;
            let gp = m.grad_log_lik_i(&d, 0, &p).unwrap();
            let gq = m.grad_log_lik_i(&d, 0, &q).unwrap();
            for k in 0..2 {
                let fd = (gp[k] - gq[k]) / 2e-5;
                assert!((h[(k, j)] - fd).abs() / h[(k, j)].abs() < 1e-5);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences_for_all_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let cases: Vec<(Model, Dataset)> = vec![
            (
                Model::new(Family::GaussianLocationScale, Prior::Flat),
                generate(&SyntheticSpec::new(SyntheticKind::Gaussian1d, 50, 3)).unwrap(),
            ),
            (Model::new(Family::Logistic, Prior::Flat), logistic_data(4)),
            (Model::new(Family::Gamma { kappa: 2.0 }, Prior::Flat), gamma_data(5)),
        ];
        for (m, d) in &cases {
            let dim = m.dim(d);
            for _ in 0..100 {
                let i = rng.random_range(0..d.n());
                let theta: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.8..0.8)).collect();
                let g = m.grad_log_lik_i(d, i, &theta).unwrap();
                let fd = fd_grad(m, d, i, &theta, 1e-5);
                let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!(err / (1.0 + g.norm()) < 1e-5, "{} grad err {err}", m.family_name());

                let h = m.hess_log_lik_i(d, i, &theta).unwrap();
                let mut fd_h = DMatrix::zeros(dim, dim);
                for j in 0..dim {
                    let mut p = theta.clone();
                    let mut q = theta.clone();
                    p[j] += 1e-5;
                    q[j] -= 1e-5;
                    let col = (m.grad_log_lik_i(d, i, &p).unwrap() - m.grad_log_lik_i(d, i, &q).unwrap()) / 2e-5;
                    fd_h.set_column(j, &col);
                }
                let err = (&h - &fd_h).norm();
                assert!(err / (1.0 + h.norm()) < 1e-4, "{} hess err {err}", m.family_name());
            }
        }
    }

    #[test]
    fn logistic_third_derivative_bound() {
        let m = Model::new(Family::Logistic, Prior::Flat);
        let d = Dataset::new(vec![0.6, 0.8, -0.3, 0.1, 0.0, 1.0], 2, Some(vec![1.0, -1.0, 1.0])).unwrap();
        let bound = m.third_deriv_bound(&d, &[0.0, 0.0]).unwrap();
        assert!(bound <= 0.25 + 1e-15);
        // |φ'''| ≤ ¼ on a dense grid
        let max = (-4000..=4000)
            .map(|k| logistic_phi3(k as f64 * 0.005).abs())
            .fold(0.0, f64::max);
        assert!(max <= 0.25);
    }

    #[test]
    fn gamma_bound_vanishes_for_zero_responses() {
        let m = Model::new(Family::Gamma { kappa: 2.0 }, Prior::Flat);
        let d = Dataset::new(vec![1.0, 0.5, 1.0, -0.5], 2, Some(vec![0.0, 0.0])).unwrap();
        assert_eq!(m.third_deriv_bound(&d, &[0.1, 0.2]).unwrap(), 0.0);
        assert!(matches!(
            m.third_deriv_bound(&d, &[0.1]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gaussian_third_derivative_bound_matches_grid_search() {
        let d = generate(&SyntheticSpec::new(SyntheticKind::Gaussian1d, 100, 21)).unwrap();
        let m = Model::new(Family::GaussianLocationScale, Prior::Flat);
        let theta_ref = m.default_start(&d);
        let bound = m.third_deriv_bound(&d, theta_ref.as_slice()).unwrap();
        // numerically differentiated third partials over a dense box grid
        let hstep = 1e-3;
        let third = |i: usize, th: [f64; 2], a: usize, b: usize, c: usize| {
            // finite difference along c of the analytic Hessian entry (a, b)
            let mut p = th;
            let mut q = th;
            p[c] += hstep;
            q[c] -= hstep;
            let hp = m.hess_log_lik_i(&d, i, &p).unwrap();
            let hq = m.hess_log_lik_i(&d, i, &q).unwrap();
            (hp[(a, b)] - hq[(a, b)]) / (2.0 * hstep)
        };
        let mut best = 0.0f64;
        let steps = 20;
        for gi in 0..=steps {
            for gj in 0..=steps {
                let th = [
                    theta_ref[0] - 1.0 + 2.0 * gi as f64 / steps as f64,
                    theta_ref[1] - 1.0 + 2.0 * gj as f64 / steps as f64,
                ];
                for i in 0..d.n() {
                    for (a, b, c) in [(0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)] {
                        best = best.max(third(i, th, a, b, c).abs());
                    }
                }
            }
        }
        assert!(bound >= best * (1.0 - 1e-6), "bound {bound} below grid max {best}");
        assert!((bound - best).abs() / best < 0.05, "bound {bound} grid {best}");
    }

    #[test]
    fn log_prior_examples() {
        let flat = Model::new(Family::Logistic, Prior::Flat);
        assert_eq!(flat.log_prior(&[3.0, -1.0]), 0.0);
        let c = Model::new(
            Family::Logistic,
            Prior::Cauchy {
                location: vec![0.0],
                scale: vec![2.5],
            },
        );
        let pi = std::f64::consts::PI;
        assert_relative_eq!(c.log_prior(&[0.0]), -(2.5 * pi).ln(), epsilon = 1e-14);
        assert_relative_eq!(c.log_prior(&[2.5]), -(5.0 * pi).ln(), epsilon = 1e-14);
    }

    #[test]
    fn full_log_lik_examples() {
        let (m, d) = gaussian(&[-1.0, 0.0, 1.0]);
        let mut counter = EvalCounter::default();
        let v = m.full_log_lik(&d, &[0.0, 0.0], &mut counter).unwrap();
        assert_relative_eq!(v, -1.5 * (2.0 * std::f64::consts::PI).ln() - 1.0, epsilon = 1e-14);
        assert_eq!(counter.0, 3);

        let (m, d) = gaussian(&[0.7]);
        let mut c = EvalCounter::default();
        assert_eq!(
            m.full_log_lik(&d, &[0.1, 0.2], &mut c).unwrap(),
            m.log_lik_i(&d, 0, &[0.1, 0.2]).unwrap()
        );

        let d = gamma_data(9);
        let m = Model::new(Family::Gamma { kappa: 2.0 }, Prior::Flat);
        let theta = [0.4, 0.2, -0.1];
        let mut manual = 0.0;
        for i in 0..d.n() {
            manual += m.log_lik_i(&d, i, &theta).unwrap();
        }
        assert_eq!(m.full_log_lik(&d, &theta, &mut c).unwrap(), manual);
    }

    #[test]
    fn log_lik_is_permutation_invariant() {
        let d = logistic_data(12);
        let m = Model::new(Family::Logistic, Prior::Flat);
        let perm: Vec<usize> = (0..d.n()).rev().collect();
        let p = d.select(&perm).unwrap();
        let theta = [0.3, -0.2, 0.5];
        for (new, &old) in perm.iter().enumerate() {
            assert_eq!(
                m.log_lik_i(&p, new, &theta).unwrap(),
                m.log_lik_i(&d, old, &theta).unwrap()
            );
        }
    }

    #[test]
    fn firefly_bound_is_exact_at_expansion_point_and_below_elsewhere() {
        let d = generate(&SyntheticSpec::new(SyntheticKind::Gaussian1d, 200, 2)).unwrap();
        let m = Model::new(Family::GaussianLocationScale, Prior::Flat);
        let star = m.default_start(&d);
        let spec = BoundSpec::new(&m, &d, star.clone()).unwrap();
        for i in 0..d.n() {
            let b = m.firefly_lower_bound_i(&d, i, star.as_slice(), &spec).unwrap();
            assert_relative_eq!(b, m.log_lik_i(&d, i, star.as_slice()).unwrap(), epsilon = 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let theta: Vec<f64> = star.iter().map(|s| s + rng.random_range(-0.3..0.3)).collect();
            for i in 0..d.n() {
                let b = m.firefly_lower_bound_i(&d, i, &theta, &spec).unwrap();
                assert!(b <= m.log_lik_unchecked(&d, i, &theta));
            }
        }
        let far = [star[0] + 2.0, star[1]];
        assert!(matches!(
            m.firefly_lower_bound_i(&d, 0, &far, &spec),
            Err(Error::OutsideTrustRegion { .. })
        ));
    }

    #[test]
    fn logistic_firefly_gap_is_within_twice_the_remainder() {
        // every record has the same norm so the per-datum and global M agree
        let s = 0.6f64.sqrt();
        let d = Dataset::new(vec![s, s, -s, s, s, -s], 2, Some(vec![1.0, -1.0, 1.0])).unwrap();
        let m = Model::new(Family::Logistic, Prior::Flat);
        let star = Theta::from_vec(vec![0.2, -0.1]);
        let spec = BoundSpec::new(&m, &d, star.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let h = rng.random_range(0.01..2.0);
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let theta = [star[0] + h * angle.cos(), star[1] + h * angle.sin()];
            for i in 0..d.n() {
                let gap = m.log_lik_unchecked(&d, i, &theta) - m.firefly_lower_bound_i(&d, i, &theta, &spec).unwrap();
                assert!(gap >= 0.0);
                assert!(gap <= 2.0 * spec.remainder_m / 6.0 * h.powi(3) * (1.0 + 1e-12));
            }
        }
    }
}
