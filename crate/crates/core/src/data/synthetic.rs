use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// x_i ~ N(0, 1), one feature, no response.
    Gaussian1d,
    /// x_i = exp(z_i), z_i ~ N(0, 1).
    Lognormal1d,
    /// Labels ±1 with equal probability, features N(t·m, s²I).
    LogisticTwoGaussians,
    /// Intercept plus N(0, 1) covariates, y ~ Gamma(κ, e^{xᵀθ}/κ).
    GammaFromCovariates,
    /// Ten quantitative attributes loosely shaped like the forest cover
    /// data, labels from a logistic link.
    CovtypeLike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub seed: u64,
    /// Class mean m for `logistic_two_gaussians` (class -1 uses -m).
    #[serde(default = "default_class_mean")]
    pub class_mean: Vec<f64>,
    #[serde(default = "default_class_sd")]
    pub class_sd: f64,
    /// Coefficients for `gamma_from_covariates`, intercept first.
    #[serde(default = "default_gamma_theta")]
    pub gamma_theta: Vec<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn default_class_mean() -> Vec<f64> {
    vec![0.5, 0.5]
}
fn default_class_sd() -> f64 {
    1.0
}
fn default_gamma_theta() -> Vec<f64> {
    vec![0.5, 0.3, -0.2]
}
fn default_kappa() -> f64 {
    2.0
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            seed,
            class_mean: default_class_mean(),
            class_sd: default_class_sd(),
            gamma_theta: default_gamma_theta(),
            kappa: default_kappa(),
        }
    }
}

/// Deterministic synthetic dataset for `spec`.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n == 0 {
        return Err(Error::invalid("synthetic dataset needs n >= 1"));
    }
    let mut rng = stream(spec.seed, Purpose::Auxiliary);
    let n = spec.n;
    let (features, d, response, roles) = match spec.kind {
        SyntheticKind::Gaussian1d => {
            let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            (x, 1, None, vec!["feature".to_string()])
        }
        SyntheticKind::Lognormal1d => {
            let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal).exp()).collect();
            (x, 1, None, vec!["feature".to_string()])
        }
        SyntheticKind::LogisticTwoGaussians => {
            if spec.class_mean.is_empty() || !(spec.class_sd > 0.0) {
                return Err(Error::invalid("class_mean must be nonempty and class_sd > 0"));
            }
            let d = spec.class_mean.len();
            let mut x = Vec::with_capacity(n * d);
            let mut t = Vec::with_capacity(n);
            for _ in 0..n {
                let label = if rng.random::<bool>() { 1.0 } else { -1.0 };
                for m in &spec.class_mean {
                    let z: f64 = rng.sample(StandardNormal);
                    x.push(label * m + spec.class_sd * z);
                }
                t.push(label);
            }
            let mut roles = vec!["feature".to_string(); d];
            roles.push("label".into());
            (x, d, Some(t), roles)
        }
        SyntheticKind::GammaFromCovariates => {
            if spec.gamma_theta.is_empty() || !(spec.kappa > 0.0) {
                return Err(Error::invalid("gamma_theta must be nonempty and kappa > 0"));
            }
            let d = spec.gamma_theta.len();
            let mut x = Vec::with_capacity(n * d);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let mut row = Vec::with_capacity(d);
                row.push(1.0);
                for _ in 1..d {
                    row.push(rng.sample(StandardNormal));
                }
                let eta: f64 = super::dot(&row, &spec.gamma_theta);
                let g = Gamma::new(spec.kappa, eta.exp() / spec.kappa).map_err(|e| Error::invalid(e.to_string()))?;
                y.push(g.sample(&mut rng));
                x.extend_from_slice(&row);
            }
            let mut roles = vec!["intercept".to_string()];
            roles.extend(std::iter::repeat_n("feature".to_string(), d - 1));
            roles.push("response".into());
            (x, d, Some(y), roles)
        }
        SyntheticKind::CovtypeLike => {
            let table = covtype_like_table(n, spec.seed);
            let mut x = Vec::with_capacity(n * 10);
            let mut t = Vec::with_capacity(n);
            for row in &table {
                x.extend_from_slice(&row[..10]);
                t.push(if row[10] > 0.5 { 1.0 } else { -1.0 });
            }
            let mut roles = vec!["feature".to_string(); 10];
            roles.push("label".into());
            (x, 10, Some(t), roles)
        }
    };
    Ok(Dataset::new(features, d, response)?.with_meta(DatasetMeta {
        column_roles: roles,
        intercept: spec.kind == SyntheticKind::GammaFromCovariates,
        source: format!("synthetic {:?} n={} seed={}", spec.kind, spec.n, spec.seed),
        ..Default::default()
    }))
}

/// Raw table of `n` rows with eleven columns: ten quantitative attributes
/// (elevation, aspect, slope, hydrology distances, road distance, three
/// hillshades, fire-point distance) and a {0,1} label in the last column.
/// The fire-point distance is gamma distributed given the other nine, so it
/// can serve as a gamma-regression response.
pub fn covtype_like_table(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, Purpose::Auxiliary);
    let normal = |m: f64, s: f64| Normal::new(m, s).unwrap();
    let gamma = |k: f64, s: f64| Gamma::new(k, s).unwrap();
    let elevation = normal(2960.0, 280.0);
    let aspect = Uniform::new(0.0, 360.0).unwrap();
    let slope = gamma(2.5, 5.6);
    let hydro_h = gamma(1.5, 180.0);
    let hydro_v = normal(46.0, 58.0);
    let road = gamma(1.6, 1470.0);
    let shade = [normal(212.0, 27.0), normal(223.0, 20.0), normal(143.0, 38.0)];
    // population location/scale of the nine attributes, used for the links
    let loc = [2960.0, 180.0, 14.0, 270.0, 46.0, 2352.0, 212.0, 223.0, 143.0];
    let scale = [280.0, 104.0, 8.9, 220.0, 58.0, 1860.0, 27.0, 20.0, 38.0];
    let fire_coef = [0.25, 0.0, -0.1, 0.05, 0.0, 0.3, 0.05, 0.0, -0.05];
    let label_coef = [1.2, 0.1, -0.4, 0.3, -0.2, 0.5, 0.2, 0.1, -0.3, 0.4];
    let fire_kappa = 2.0;
    (0..n)
        .map(|_| {
            let mut row = Vec::with_capacity(11);
            row.push(elevation.sample(&mut rng));
            row.push(aspect.sample(&mut rng));
            row.push(slope.sample(&mut rng));
            row.push(hydro_h.sample(&mut rng));
            row.push(hydro_v.sample(&mut rng));
            row.push(road.sample(&mut rng));
            for s in &shade {
                row.push(s.sample(&mut rng).clamp(0.0, 254.0));
            }
            let z: Vec<f64> = (0..9).map(|j| (row[j] - loc[j]) / scale[j]).collect();
            let eta = 1980f64.ln() + super::dot(&z, &fire_coef);
            row.push(gamma(fire_kappa, eta.exp() / fire_kappa).sample(&mut rng));
            let z_fire = (row[9] - 1980.0) / 1320.0;
            let score = super::dot(&z, &label_coef[..9]) + label_coef[9] * z_fire - 0.2;
            let p = 1.0 / (1.0 + (-score).exp());
            row.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec::new(SyntheticKind::LogisticTwoGaussians, 200, 3);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SyntheticSpec {
            seed: 4,
            ..spec.clone()
        };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn gaussian_mle_sigma_is_near_one() {
        let ds = generate(&SyntheticSpec::new(SyntheticKind::Gaussian1d, 100_000, 1)).unwrap();
        let n = ds.n() as f64;
        let mean = ds.features().iter().sum::<f64>() / n;
        let var = ds.features().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!((var.sqrt() - 1.0).abs() < 0.01, "sigma_hat = {}", var.sqrt());
    }

    #[test]
    fn lognormal_values_are_positive() {
        let ds = generate(&SyntheticSpec::new(SyntheticKind::Lognormal1d, 5_000, 2)).unwrap();
        assert!(ds.features().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn logistic_classes_are_balanced() {
        let ds = generate(&SyntheticSpec::new(SyntheticKind::LogisticTwoGaussians, 100_000, 5)).unwrap();
        let pos = ds.responses().unwrap().iter().filter(|&&t| t > 0.0).count();
        let frac = pos as f64 / ds.n() as f64;
        assert!((frac - 0.5).abs() < 0.01, "class balance {frac}");
    }

    #[test]
    fn gamma_responses_are_nonnegative_with_intercept() {
        let ds = generate(&SyntheticSpec::new(SyntheticKind::GammaFromCovariates, 1000, 8)).unwrap();
        assert!(ds.responses().unwrap().iter().all(|&y| y >= 0.0));
        assert!((0..ds.n()).all(|i| ds.row(i)[0] == 1.0));
        assert!(ds.meta.intercept);
    }

    #[test]
    fn covtype_like_has_eleven_columns_and_binary_labels() {
        let t = covtype_like_table(500, 1);
        assert!(t.iter().all(|r| r.len() == 11));
        assert!(t.iter().all(|r| r[10] == 0.0 || r[10] == 1.0));
        assert!(t.iter().all(|r| r[9] >= 0.0));
        let ones = t.iter().filter(|r| r[10] == 1.0).count();
        assert!(ones > 100 && ones < 400);
    }

    #[test]
    fn zero_size_is_rejected() {
        assert!(generate(&SyntheticSpec::new(SyntheticKind::Gaussian1d, 0, 1)).is_err());
    }
}
