//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tallmh::data::{
    generate, ingest_csv, read_dataset, subset, write_dataset, ColumnRole, Dataset, PreprocessSpec, SyntheticKind,
    SyntheticSpec,
};
use tallmh::diagnostics::{
    autocorrelation, compare_posteriors, eval_summary, gelman_rubin, quantile_sorted, write_autocorrelation_csv,
    write_histogram_csv, Autocorrelation, EvalSummary,
};
use tallmh::models::{BoundSpec, Model};
use tallmh::proxy::build_proxy;
use tallmh::samplers::{
    austerity_run, confidence_run, delayed_acceptance_run, find_map, firefly_run, grid_variance, mh_run,
    naive_subsample_demo, read_trace, rhee_glynn_run, sgld_run, write_trace, AusterityConfig, ChainTrace,
    ConfidenceConfig, ConfidenceStats, FireflyConfig, NaiveEstimator, ProxySetup, RandomWalk, RheeGlynnConfig,
    SgldConfig, StepSchedule,
};
use tallmh::Theta;

use crate::config::{FamilyName, ModelSpec, ProxyChoice, RunConfig, SamplerSpec};
use crate::CliError;

/// Lowercase hex SHA-256 of a file.
pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Runtime(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn cmd_generate(spec: &SyntheticSpec, out: &Path) -> Result<Dataset, CliError> {
    let mut data = generate(spec)?;
    data.meta.source = format!("synthetic:{}", serde_json::to_string(spec).unwrap_or_default());
    write_dataset(&data, out)?;
    Ok(data)
}

pub fn cmd_ingest(
    input: &Path,
    spec: &PreprocessSpec,
    subset_n: Option<usize>,
    subset_seed: u64,
    out: &Path,
) -> Result<Dataset, CliError> {
    let mut data = ingest_csv(input, spec)?;
    if let Some(k) = subset_n {
        let meta = data.meta.clone();
        data = subset(&data, k, subset_seed)?;
        data.meta = tallmh::data::DatasetMeta { n: data.n(), ..meta };
    }
    write_dataset(&data, out)?;
    Ok(data)
}

/// Parses `feature,label,...` into column roles.
pub fn parse_roles(s: &str) -> Result<Vec<ColumnRole>, CliError> {
    s.split(',')
        .map(|r| {
            serde_json::from_value(Value::from(r.trim())).map_err(|_| {
                CliError::Usage(format!(
                    "unknown column role `{r}`; use feature, label, response or ignore"
                ))
            })
        })
        .collect()
}

/// Model, data and starting point shared by all chains of a run.
pub struct Prepared {
    pub model: Model,
    pub data: Dataset,
    pub map: Theta,
    pub theta0: Theta,
    pub dataset_sha256: String,
}

pub fn build_model(spec: &ModelSpec, data: &Dataset) -> Model {
    let dim = spec.build(0, false).dim(data);
    spec.build(dim, data.meta.intercept)
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let data = read_dataset(&cfg.dataset)?;
    let model = build_model(&cfg.model, &data);
    model.validate(&data)?;
    let map = find_map(&model, &data, &model.default_start(&data), 1e-10)?;
    if !map.converged {
        log::warn!("MAP search stopped with gradient norm {}", map.grad_inf_norm);
    }
    let theta0 = match &cfg.theta0 {
        Some(v) => {
            let t = Theta::from_vec(v.clone());
            model.check_theta(&data, t.as_slice())?;
            t
        }
        None => map.theta.clone(),
    };
    Ok(Prepared {
        dataset_sha256: file_sha256(&cfg.dataset)?,
        model,
        data,
        map: map.theta,
        theta0,
    })
}

/// Output of one chain.
pub struct ChainResult {
    pub trace: ChainTrace,
    pub confidence: Option<ConfidenceStats>,
}

pub fn run_chain(cfg: &RunConfig, p: &Prepared, seed: u64) -> Result<ChainResult, CliError> {
    let (model, data) = (&p.model, &p.data);
    let n = data.n();
    let scale = cfg.proposal.scale.unwrap_or(1.0 / (n as f64).sqrt());
    let mut rw = RandomWalk::new(scale, cfg.proposal.adaptation)?;
    let plain = |trace| ChainResult {
        trace,
        confidence: None,
    };
    Ok(match cfg.sampler {
        SamplerSpec::Mh {} => plain(mh_run(model, data, &mut rw, &p.theta0, cfg.n_iter, seed)?),
        SamplerSpec::Confidence {
            delta,
            schedule,
            gamma,
            sampling,
            proxy,
        } => {
            let cc = ConfidenceConfig {
                delta,
                schedule,
                gamma,
                sampling,
            };
            let setup = match proxy.policy() {
                Some(policy) => Some(ProxySetup {
                    proxy: build_proxy(model, data, &p.map)?,
                    policy,
                }),
                None => None,
            };
            let (trace, stats) = confidence_run(model, data, &cc, setup, &mut rw, &p.theta0, cfg.n_iter, seed)?;
            ChainResult {
                trace,
                confidence: Some(stats),
            }
        }
        SamplerSpec::Austerity { eps, t_init, growth } => {
            let ac = AusterityConfig { eps, t_init, growth };
            plain(austerity_run(model, data, &ac, &mut rw, &p.theta0, cfg.n_iter, seed)?)
        }
        SamplerSpec::Firefly { resample_fraction } => {
            let bound = BoundSpec::new(model, data, p.map.clone())?;
            let fc = FireflyConfig { resample_fraction };
            plain(firefly_run(model, data, &bound, fc, rw, &p.theta0, cfg.n_iter, seed)?)
        }
        SamplerSpec::RheeGlynn { t, eps } => {
            let proxy = build_proxy(model, data, &p.map)?;
            let rc = RheeGlynnConfig { t, eps };
            plain(rhee_glynn_run(
                model, data, &proxy, rc, &mut rw, &p.theta0, cfg.n_iter, seed,
            )?)
        }
        SamplerSpec::Sgld {
            t_sub,
            eps0,
            exponent,
            noiseless,
        } => {
            let sc = SgldConfig {
                t_sub: t_sub.unwrap_or((n / 10).max(1)),
                schedule: StepSchedule {
                    eps0: eps0.unwrap_or(scale * scale),
                    exponent,
                },
                noiseless,
            };
            plain(sgld_run(model, data, &sc, &p.theta0, cfg.n_iter, seed)?)
        }
        SamplerSpec::DelayedAcceptance { n_batches } => plain(delayed_acceptance_run(
            model, data, n_batches, &mut rw, &p.theta0, cfg.n_iter, seed,
        )?),
    })
}

fn summary_json(s: &EvalSummary) -> Value {
    json!({
        "mean_fraction": s.mean_fraction,
        "median_fraction": s.median_fraction,
        "quantiles": s.quantiles,
    })
}

/// Runs every chain of `cfg` and writes `chain_<c>.csv` with its sidecar
/// and a re-runnable `chain_<c>.config.json`.
pub fn cmd_run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let prepared = prepare(cfg)?;
    create_dir(&cfg.output)?;
    let results: Vec<Result<ChainResult, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.chains)
            .map(|c| {
                let p = &prepared;
                s.spawn(move || run_chain(cfg, p, cfg.seed + c as u64))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(CliError::Runtime("chain thread panicked".into())))
            })
            .collect()
    });
    let mut paths = Vec::with_capacity(cfg.chains);
    for (c, res) in results.into_iter().enumerate() {
        let res = res?;
        let chain_cfg = RunConfig {
            seed: cfg.seed + c as u64,
            chains: 1,
            ..cfg.clone()
        };
        let cfg_value = serde_json::to_value(&chain_cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
        let cfg_path = cfg.output.join(format!("chain_{c}.config.json"));
        write_json(&cfg_path, &cfg_value)?;
        let summary = eval_summary(&res.trace)?;
        let run = json!({
            "config": cfg_value,
            "config_sha256": hex(&Sha256::digest(cfg_value.to_string().as_bytes())),
            "dataset_sha256": prepared.dataset_sha256,
            "chain": c,
            "map": prepared.map.as_slice(),
            "theta0": prepared.theta0.as_slice(),
            "acceptance_rate": res.trace.acceptance_rate(),
            "eval_summary": summary_json(&summary),
            "confidence": res.confidence.map(|s| json!({
                "exhausted": s.exhausted,
                "refreshes": s.refreshes,
                "proxy_fallbacks": s.proxy_fallbacks,
            })),
        });
        let path = cfg.output.join(format!("chain_{c}.csv"));
        write_trace(&res.trace, &path, run)?;
        log::info!(
            "chain {c}: acceptance {:.3}, mean L/n {:.4}, median L/n {:.4}",
            res.trace.acceptance_rate(),
            summary.mean_fraction,
            summary.median_fraction
        );
        paths.push(path);
    }
    Ok(paths)
}

/// Report of `cmd_diagnose`.
#[derive(Debug, Clone)]
pub struct DiagnoseReport {
    pub gelman_rubin: Option<Vec<f64>>,
    pub summaries: Vec<EvalSummary>,
    pub notes: Vec<String>,
}

pub fn cmd_diagnose(
    traces: &[PathBuf],
    reference: Option<&Path>,
    out: &Path,
    max_lag: usize,
    burn_in: usize,
) -> Result<DiagnoseReport, CliError> {
    if traces.is_empty() {
        return Err(CliError::Usage("diagnose needs at least one trace".into()));
    }
    let mut chains = Vec::with_capacity(traces.len());
    for p in traces {
        let (t, _) = read_trace(p)?;
        if burn_in >= t.len() {
            return Err(CliError::Usage(format!(
                "burn-in {burn_in} leaves nothing of {}",
                p.display()
            )));
        }
        chains.push(t.tail(burn_in));
    }
    let dim = chains[0].dim();
    if chains.iter().any(|c| c.dim() != dim) {
        return Err(CliError::Usage("traces have different dimensions".into()));
    }
    create_dir(out)?;
    let mut notes = Vec::new();

    let mut acf: Vec<(String, Autocorrelation)> = Vec::new();
    for (c, t) in chains.iter().enumerate() {
        for j in 0..dim {
            let a = autocorrelation(&t.coordinate(j), max_lag)?;
            if a.constant {
                notes.push(format!(
                    "chain {c} coordinate {j} is constant; autocorrelation set to zero"
                ));
            }
            acf.push((format!("chain{c}_theta{j}"), a));
        }
    }
    write_autocorrelation_csv(&out.join("autocorrelation.csv"), &acf)?;

    let summaries: Vec<EvalSummary> = chains.iter().map(eval_summary).collect::<Result<_, _>>()?;
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .zip(&chains)
        .enumerate()
        .map(|(c, (s, t))| {
            let mut r = vec![
                c.to_string(),
                s.mean_fraction.to_string(),
                s.median_fraction.to_string(),
            ];
            r.extend(s.quantiles.iter().map(|q| q.1.to_string()));
            r.push(t.acceptance_rate().to_string());
            r
        })
        .collect();
    write_rows(
        &out.join("eval_summary.csv"),
        &[
            "chain",
            "mean_fraction",
            "median_fraction",
            "q05",
            "q25",
            "q50",
            "q75",
            "q95",
            "acceptance_rate",
        ],
        &rows,
    )?;
    let fractions: Vec<f64> = chains.iter().flat_map(|t| t.eval_fractions()).collect();
    write_histogram_csv(&out.join("fraction_histogram.csv"), &fractions, 0.0, 2.0, 40)?;

    let rhat = if chains.len() >= 2 {
        let r: Vec<f64> = (0..dim)
            .map(|j| {
                let cols: Vec<Vec<f64>> = chains.iter().map(|t| t.coordinate(j)).collect();
                let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
                gelman_rubin(&refs)
            })
            .collect::<Result<_, _>>()?;
        let rows: Vec<Vec<String>> = r
            .iter()
            .enumerate()
            .map(|(j, v)| vec![j.to_string(), v.to_string()])
            .collect();
        write_rows(&out.join("gelman_rubin.csv"), &["coordinate", "rhat"], &rows)?;
        Some(r)
    } else {
        notes.push("Gelman-Rubin omitted: it needs at least two chains".into());
        None
    };

    if let Some(rp) = reference {
        let (r, _) = read_trace(rp)?;
        let r = r.tail(burn_in.min(r.len().saturating_sub(1)));
        let mut rows = Vec::new();
        for (c, t) in chains.iter().enumerate() {
            for m in compare_posteriors(t, &r)? {
                rows.push(vec![
                    c.to_string(),
                    m.coordinate.to_string(),
                    m.mean_a.to_string(),
                    m.mean_b.to_string(),
                    m.sd_a.to_string(),
                    m.sd_b.to_string(),
                    m.mean_diff.to_string(),
                    m.sd_diff.to_string(),
                    m.wasserstein.to_string(),
                ]);
            }
        }
        write_rows(
            &out.join("comparison.csv"),
            &[
                "chain",
                "coordinate",
                "mean",
                "reference_mean",
                "sd",
                "reference_sd",
                "mean_diff",
                "sd_diff",
                "wasserstein",
            ],
            &rows,
        )?;
    }

    let report = json!({
        "traces": traces,
        "reference": reference,
        "burn_in": burn_in,
        "gelman_rubin": rhat,
        "eval_summaries": summaries.iter().map(summary_json).collect::<Vec<_>>(),
        "notes": notes,
    });
    write_json(&out.join("report.json"), &report)?;
    Ok(DiagnoseReport {
        gelman_rubin: rhat,
        summaries,
        notes,
    })
}

/// One row of the saturation table.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationRow {
    pub n: usize,
    pub median_evals: f64,
    pub median_log10_fraction: f64,
    pub mean_fraction: f64,
    pub acceptance_rate: f64,
}

pub struct SaturationSpec {
    pub family: FamilyName,
    pub sizes: Vec<usize>,
    pub n_iter: usize,
    pub seed: u64,
    pub proxy: ProxyChoice,
    pub delta: f64,
}

/// Confidence-sampler runs on synthetic data of increasing size.
pub fn cmd_saturation(spec: &SaturationSpec, out: &Path) -> Result<Vec<SaturationRow>, CliError> {
    if spec.sizes.is_empty() {
        return Err(CliError::Usage("saturation needs at least one size".into()));
    }
    if let Some(&n) = spec.sizes.iter().find(|&&n| n < 10) {
        return Err(CliError::Usage(format!(
            "dataset size {n} is below 10; the concentration bound is degenerate on so few points"
        )));
    }
    let (kind, family) = match spec.family {
        FamilyName::Gaussian => (SyntheticKind::Gaussian1d, FamilyName::Gaussian),
        FamilyName::Logistic => (SyntheticKind::LogisticTwoGaussians, FamilyName::Logistic),
        FamilyName::Gamma => (SyntheticKind::GammaFromCovariates, FamilyName::Gamma),
    };
    let mut rows = Vec::new();
    for &n in &spec.sizes {
        let data = generate(&SyntheticSpec::new(kind, n, spec.seed))?;
        let model = build_model(
            &ModelSpec {
                family,
                kappa: 2.0,
                prior: Default::default(),
                trust_radius: 1.0,
            },
            &data,
        );
        let map = find_map(&model, &data, &model.default_start(&data), 1e-10)?.theta;
        let setup = match spec.proxy.policy() {
            Some(policy) => Some(ProxySetup {
                proxy: build_proxy(&model, &data, &map)?,
                policy,
            }),
            None => None,
        };
        let cc = ConfidenceConfig {
            delta: spec.delta,
            ..Default::default()
        };
        let (trace, _) = confidence_run(
            &model,
            &data,
            &cc,
            setup,
            &mut RandomWalk::for_data_size(n),
            &map,
            spec.n_iter,
            spec.seed,
        )?;
        rows.push(saturation_row(&trace));
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.median_evals.to_string(),
                r.median_log10_fraction.to_string(),
                r.mean_fraction.to_string(),
                r.acceptance_rate.to_string(),
            ]
        })
        .collect();
    write_rows(
        out,
        &[
            "n",
            "median_evals",
            "median_log10_fraction",
            "mean_fraction",
            "acceptance_rate",
        ],
        &table,
    )?;
    Ok(rows)
}

pub fn saturation_row(trace: &ChainTrace) -> SaturationRow {
    let n = trace.n_data;
    let mut evals: Vec<f64> = trace.evals.iter().map(|&l| l as f64).collect();
    evals.sort_by(f64::total_cmp);
    let median = quantile_sorted(&evals, 0.5);
    let f = trace.eval_fractions();
    SaturationRow {
        n,
        median_evals: median,
        median_log10_fraction: (median / n as f64).log10(),
        mean_fraction: f.iter().sum::<f64>() / f.len() as f64,
        acceptance_rate: trace.acceptance_rate(),
    }
}

/// Labelled traces compared against the first one, with shared-bin
/// marginal histograms.
pub fn cmd_compare(traces: &[(String, PathBuf)], out: &Path, bins: usize) -> Result<(), CliError> {
    if traces.len() < 2 {
        return Err(CliError::Usage(
            "compare needs a reference trace and at least one other".into(),
        ));
    }
    if bins == 0 {
        return Err(CliError::Usage("bins must be positive".into()));
    }
    let loaded: Vec<(String, ChainTrace)> = traces
        .iter()
        .map(|(l, p)| Ok((l.clone(), read_trace(p)?.0)))
        .collect::<Result<_, CliError>>()?;
    let dim = loaded[0].1.dim();
    if loaded.iter().any(|(_, t)| t.dim() != dim) {
        return Err(CliError::Usage("traces have different dimensions".into()));
    }
    create_dir(out)?;
    let reference = &loaded[0].1;
    let mut metrics = Vec::new();
    for (label, t) in &loaded {
        let s = eval_summary(t)?;
        for m in compare_posteriors(t, reference)? {
            metrics.push(vec![
                label.clone(),
                m.coordinate.to_string(),
                m.mean_a.to_string(),
                m.sd_a.to_string(),
                m.mean_diff.to_string(),
                m.sd_diff.to_string(),
                m.wasserstein.to_string(),
                s.mean_fraction.to_string(),
                s.median_fraction.to_string(),
            ]);
        }
    }
    write_rows(
        &out.join("metrics.csv"),
        &[
            "label",
            "coordinate",
            "mean",
            "sd",
            "mean_diff",
            "sd_diff",
            "wasserstein",
            "mean_fraction",
            "median_fraction",
        ],
        &metrics,
    )?;
    let mut rows = Vec::new();
    for j in 0..dim {
        let cols: Vec<Vec<f64>> = loaded.iter().map(|(_, t)| t.coordinate(j)).collect();
        let lo = cols.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
        let hi = cols.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        for ((label, t), col) in loaded.iter().zip(&cols) {
            let w = t.weights.clone().unwrap_or_else(|| vec![1.0; col.len()]);
            let total: f64 = w.iter().sum();
            let mut mass = vec![0.0; bins];
            for (x, wi) in col.iter().zip(&w) {
                mass[(((x - lo) / width) as usize).min(bins - 1)] += wi;
            }
            for (k, m) in mass.iter().enumerate() {
                let a = lo + k as f64 * width;
                rows.push(vec![
                    label.clone(),
                    j.to_string(),
                    a.to_string(),
                    (a + width).to_string(),
                    (m / total / width).to_string(),
                ]);
            }
        }
    }
    write_rows(
        &out.join("marginals.csv"),
        &["label", "coordinate", "bin_lo", "bin_hi", "density"],
        &rows,
    )
}

pub struct NaiveSpec {
    pub dataset: PathBuf,
    pub model: ModelSpec,
    pub lambda: f64,
    pub estimator: NaiveEstimator,
    pub grid: Vec<Theta>,
    pub n_mc: usize,
    pub seed: u64,
}

/// Target and naive-subsampling induced target on a grid.
pub fn cmd_naive(spec: &NaiveSpec, out: &Path) -> Result<(f64, f64), CliError> {
    let data = read_dataset(&spec.dataset)?;
    let model = build_model(&spec.model, &data);
    let rows = naive_subsample_demo(
        &model,
        &data,
        spec.lambda,
        spec.estimator,
        &spec.grid,
        spec.n_mc,
        spec.seed,
    )?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v: Vec<String> = r.theta.iter().map(|x| x.to_string()).collect();
            v.extend([
                r.log_target.to_string(),
                r.log_induced_mc.to_string(),
                r.log_induced_exact.to_string(),
                r.mc_rel_se.to_string(),
                r.target.to_string(),
                r.induced.to_string(),
            ]);
            v
        })
        .collect();
    let dim = spec.grid[0].len();
    let mut header: Vec<String> = (0..dim).map(|j| format!("theta_{j}")).collect();
    header.extend(
        [
            "log_target",
            "log_induced_mc",
            "log_induced_exact",
            "mc_rel_se",
            "target",
            "induced",
        ]
        .map(String::from),
    );
    let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    write_rows(out, &header, &table)?;
    Ok((grid_variance(&rows, 0, false), grid_variance(&rows, 0, true)))
}

/// Refresh policy shorthand used by the saturation flags.
pub fn proxy_choice(alpha: Option<usize>, no_proxy: bool) -> ProxyChoice {
    match (no_proxy, alpha) {
        (true, _) => ProxyChoice::None,
        (false, Some(alpha)) => ProxyChoice::DropEveryAlpha { alpha },
        (false, None) => ProxyChoice::SingleAtMap,
    }
}
