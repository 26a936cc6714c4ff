//! Strict JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tallmh::models::{Family, Model, Prior};
use tallmh::proxy::ProxyPolicy;
use tallmh::samplers::{Adaptation, AusterityConfig, DeltaSchedule, FireflyConfig, RheeGlynnConfig, Sampling};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Gaussian,
    Logistic,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PriorName {
    #[default]
    Flat,
    /// Cauchy(0, 2.5) per coefficient, Cauchy(0, 10) on an intercept.
    Cauchy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: FamilyName,
    /// Gamma shape κ.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub prior: PriorName,
    #[serde(default = "default_trust_radius")]
    pub trust_radius: f64,
}

fn default_kappa() -> f64 {
    2.0
}

fn default_trust_radius() -> f64 {
    1.0
}

impl ModelSpec {
    /// Builds the model; `dim` and `intercept` size the Cauchy prior.
    pub fn build(&self, dim: usize, intercept: bool) -> Model {
        let family = match self.family {
            FamilyName::Gaussian => Family::GaussianLocationScale,
            FamilyName::Logistic => Family::Logistic,
            FamilyName::Gamma => Family::Gamma { kappa: self.kappa },
        };
        let prior = match self.prior {
            PriorName::Flat => Prior::Flat,
            PriorName::Cauchy => Prior::cauchy_default(dim, intercept),
        };
        Model::new(family, prior).with_trust_radius(self.trust_radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ProxyChoice {
    #[default]
    None,
    SingleAtMap,
    DropEveryAlpha {
        alpha: usize,
    },
}

impl ProxyChoice {
    pub fn policy(self) -> Option<ProxyPolicy> {
        match self {
            ProxyChoice::None => None,
            ProxyChoice::SingleAtMap => Some(ProxyPolicy::SingleAtMap),
            ProxyChoice::DropEveryAlpha { alpha } => Some(ProxyPolicy::DropEveryAlpha { alpha }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    Mh {},
    Confidence {
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default)]
        schedule: DeltaSchedule,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default)]
        sampling: Sampling,
        #[serde(default)]
        proxy: ProxyChoice,
    },
    Austerity {
        #[serde(default = "default_austerity_eps")]
        eps: f64,
        #[serde(default = "default_t_init")]
        t_init: usize,
        #[serde(default = "default_growth")]
        growth: f64,
    },
    Firefly {
        #[serde(default = "default_resample_fraction")]
        resample_fraction: f64,
    },
    RheeGlynn {
        #[serde(default = "default_rg_t")]
        t: usize,
        #[serde(default = "default_rg_eps")]
        eps: f64,
    },
    Sgld {
        /// Minibatch size; defaults to 10% of n.
        #[serde(default)]
        t_sub: Option<usize>,
        /// First stepsize; defaults to the squared proposal scale.
        #[serde(default)]
        eps0: Option<f64>,
        #[serde(default = "default_exponent")]
        exponent: f64,
        #[serde(default)]
        noiseless: bool,
    },
    DelayedAcceptance {
        #[serde(default = "default_batches")]
        n_batches: usize,
    },
}

pub const SAMPLER_NAMES: [&str; 7] = [
    "mh",
    "confidence",
    "austerity",
    "firefly",
    "rhee_glynn",
    "sgld",
    "delayed_acceptance",
];

fn default_delta() -> f64 {
    0.1
}
fn default_gamma() -> f64 {
    1.5
}
fn default_austerity_eps() -> f64 {
    AusterityConfig::default().eps
}
fn default_t_init() -> usize {
    AusterityConfig::default().t_init
}
fn default_growth() -> f64 {
    AusterityConfig::default().growth
}
fn default_resample_fraction() -> f64 {
    FireflyConfig::default().resample_fraction
}
fn default_rg_t() -> usize {
    RheeGlynnConfig::default().t
}
fn default_rg_eps() -> f64 {
    RheeGlynnConfig::default().eps
}
fn default_exponent() -> f64 {
    1.0 / 3.0
}
fn default_batches() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProposalSpec {
    /// Random-walk scale; defaults to 1/√n.
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub adaptation: Adaptation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    /// Dataset store written by `generate` or `ingest`.
    pub dataset: PathBuf,
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub proposal: ProposalSpec,
    pub n_iter: usize,
    pub seed: u64,
    pub output: PathBuf,
    #[serde(default = "default_chains")]
    pub chains: usize,
    /// Starting point; the MAP when absent.
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
}

fn default_chains() -> usize {
    1
}

/// Command-line values that replace configuration keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub family: Option<FamilyName>,
    pub sampler: Option<String>,
    pub n_iter: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub chains: Option<usize>,
}

impl RunConfig {
    /// Reads `path` (when given), applies `overrides` and validates.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        let obj = doc
            .as_object_mut()
            .ok_or_else(|| CliError::Usage("config must be a JSON object".into()))?;
        if let Some(name) = &overrides.sampler {
            if !SAMPLER_NAMES.contains(&name.as_str()) {
                return Err(unknown_sampler(name));
            }
            let same = obj.get("sampler").and_then(|s| s.get("name")).and_then(Value::as_str) == Some(name.as_str());
            if !same {
                obj.insert("sampler".into(), serde_json::json!({ "name": name }));
            }
        }
        if let Some(f) = overrides.family {
            let f = serde_json::to_value(f).expect("family names serialise");
            match obj.get_mut("model").and_then(Value::as_object_mut) {
                Some(m) => {
                    m.insert("family".into(), f);
                }
                None => {
                    obj.insert("model".into(), serde_json::json!({ "family": f }));
                }
            }
        }
        let mut set = |key: &str, v: Option<Value>| {
            if let Some(v) = v {
                obj.insert(key.into(), v);
            }
        };
        set(
            "dataset",
            overrides
                .dataset
                .as_ref()
                .map(|p| Value::from(p.to_string_lossy().into_owned())),
        );
        set("n_iter", overrides.n_iter.map(Value::from));
        set("seed", overrides.seed.map(Value::from));
        set(
            "output",
            overrides
                .output
                .as_ref()
                .map(|p| Value::from(p.to_string_lossy().into_owned())),
        );
        set("chains", overrides.chains.map(Value::from));
        if let Some(name) = doc.get("sampler").and_then(|s| s.get("name")).and_then(Value::as_str) {
            if !SAMPLER_NAMES.contains(&name) {
                return Err(unknown_sampler(name));
            }
        }
        let cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| CliError::Usage(format!("invalid run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !self.dataset.is_file() {
            return Err(CliError::Usage(format!(
                "dataset {} does not exist",
                self.dataset.display()
            )));
        }
        if self.n_iter == 0 {
            return Err(CliError::Usage("n_iter must be positive".into()));
        }
        if self.chains == 0 {
            return Err(CliError::Usage("chains must be positive".into()));
        }
        Ok(())
    }
}

fn unknown_sampler(name: &str) -> CliError {
    CliError::Usage(format!(
        "unknown sampler `{name}`; valid samplers: {}",
        SAMPLER_NAMES.join(", ")
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_sampler_name_parses_with_defaults() {
        for name in SAMPLER_NAMES {
            let s: SamplerSpec = serde_json::from_value(serde_json::json!({ "name": name })).unwrap();
            let back = serde_json::to_value(&s).unwrap();
            assert_eq!(back["name"], name);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = serde_json::json!({ "name": "confidence", "delt": 0.1 });
        assert!(serde_json::from_value::<SamplerSpec>(bad).is_err());
        let bad = serde_json::json!({ "family": "gaussian", "colour": 1 });
        assert!(serde_json::from_value::<ModelSpec>(bad).is_err());
    }

    #[test]
    fn proxy_choice_round_trips() {
        let s: SamplerSpec = serde_json::from_value(serde_json::json!({
            "name": "confidence",
            "proxy": { "mode": "drop_every_alpha", "alpha": 10 }
        }))
        .unwrap();
        match s {
            SamplerSpec::Confidence { proxy, .. } => {
                assert_eq!(proxy.policy(), Some(ProxyPolicy::DropEveryAlpha { alpha: 10 }))
            }
            _ => panic!("wrong variant"),
        }
    }
}
