//! Chain traces and their columnar text representation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Theta;

/// States visited by a chain together with per-iteration cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    /// Dataset size n, used to normalise L_k.
    pub n_data: usize,
    /// State after each iteration.
    pub states: Vec<Theta>,
    pub accepted: Vec<bool>,
    /// Likelihood evaluations L_k spent in each iteration.
    pub evals: Vec<u64>,
    /// SGLD stepsizes, used as weights of the state average.
    pub weights: Option<Vec<f64>>,
    pub seed: u64,
    pub sampler_tag: String,
}

impl ChainTrace {
    pub fn new(n_data: usize, seed: u64, sampler_tag: &str) -> Self {
        Self {
            n_data,
            states: Vec::new(),
            accepted: Vec::new(),
            evals: Vec::new(),
            weights: None,
            seed,
            sampler_tag: sampler_tag.to_owned(),
        }
    }

    pub fn push(&mut self, state: Theta, accepted: bool, evals: u64) {
        self.states.push(state);
        self.accepted.push(accepted);
        self.evals.push(evals);
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }

    /// Values of coordinate `j` along the chain.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[j]).collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|&&a| a).count() as f64 / self.accepted.len() as f64
    }

    /// L_k / n per iteration.
    pub fn eval_fractions(&self) -> Vec<f64> {
        let n = self.n_data.max(1) as f64;
        self.evals.iter().map(|&l| l as f64 / n).collect()
    }

    /// Posterior mean estimate, weighted when weights are present.
    pub fn mean(&self) -> Theta {
        let dim = self.dim();
        let mut m = Theta::zeros(dim);
        if self.is_empty() {
            return m;
        }
        match &self.weights {
            Some(w) => {
                let total: f64 = w.iter().sum();
                for (s, wk) in self.states.iter().zip(w) {
                    m += s * (wk / total);
                }
            }
            None => {
                for s in &self.states {
                    m += s;
                }
                m /= self.len() as f64;
            }
        }
        m
    }

    /// Keeps iterations from `start` on.
    pub fn tail(&self, start: usize) -> ChainTrace {
        let start = start.min(self.len());
        ChainTrace {
            n_data: self.n_data,
            states: self.states[start..].to_vec(),
            accepted: self.accepted[start..].to_vec(),
            evals: self.evals[start..].to_vec(),
            weights: self.weights.as_ref().map(|w| w[start..].to_vec()),
            seed: self.seed,
            sampler_tag: self.sampler_tag.clone(),
        }
    }
}

/// JSON sidecar written next to a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceMeta {
    pub n_data: usize,
    pub seed: u64,
    pub sampler_tag: String,
    /// Free-form run description (configuration, hashes).
    #[serde(default)]
    pub run: serde_json::Value,
}

pub fn trace_sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `iteration, theta_0.., accepted, evals[, weight]` rows and the
/// JSON sidecar.
pub fn write_trace(trace: &ChainTrace, path: &Path, run: serde_json::Value) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let dim = trace.dim();
    let mut header = vec!["iteration".to_owned()];
    header.extend((0..dim).map(|j| format!("theta_{j}")));
    header.push("accepted".into());
    header.push("evals".into());
    if trace.weights.is_some() {
        header.push("weight".into());
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for k in 0..trace.len() {
        let mut row = vec![(k + 1).to_string()];
        row.extend(trace.states[k].iter().map(|v| format!("{v:e}")));
        row.push(u8::from(trace.accepted[k]).to_string());
        row.push(trace.evals[k].to_string());
        if let Some(wts) = &trace.weights {
            row.push(format!("{:e}", wts[k]));
        }
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let meta = TraceMeta {
        n_data: trace.n_data,
        seed: trace.seed,
        sampler_tag: trace.sampler_tag.clone(),
        run,
    };
    let side = trace_sidecar_path(path);
    std::fs::write(&side, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&side, e))
}

/// Reads a trace written by [`write_trace`] together with its sidecar.
pub fn read_trace(path: &Path) -> Result<(ChainTrace, TraceMeta)> {
    if !path.is_file() {
        return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    let side = trace_sidecar_path(path);
    let meta: TraceMeta = serde_json::from_str(&std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?)?;
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let dim = header.iter().filter(|h| h.starts_with("theta_")).count();
    let weighted = header.iter().any(|h| h == "weight");
    if header.len() != dim + 3 + usize::from(weighted) {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            message: "unexpected trace header".into(),
        });
    }
    let mut trace = ChainTrace::new(meta.n_data, meta.seed, &meta.sampler_tag);
    let mut weights = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let parse = |idx: usize| -> Result<f64> {
            rec.get(idx)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    path: path.to_owned(),
                    line,
                    message: format!("bad value in column {}", idx + 1),
                })
        };
        let state: Vec<f64> = (1..=dim).map(parse).collect::<Result<_>>()?;
        let accepted = parse(dim + 1)? != 0.0;
        let evals = parse(dim + 2)? as u64;
        trace.push(Theta::from_vec(state), accepted, evals);
        if weighted {
            weights.push(parse(dim + 3)?);
        }
    }
    if weighted {
        trace.weights = Some(weights);
    }
    Ok((trace, meta))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_owned(),
            line,
            message: format!("{other:?}"),
        },
    }
}
