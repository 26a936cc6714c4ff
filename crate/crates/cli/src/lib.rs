//! Command-line orchestration of tall-data MH experiments: dataset
//! generation and ingestion, sampler runs, diagnostics, saturation tables
//! and posterior comparisons, all written as CSV/JSON.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use tallmh::data::{PreprocessSpec, SyntheticKind, SyntheticSpec};
use tallmh::samplers::NaiveEstimator;
use tallmh::Theta;

use crate::commands::{NaiveSpec, SaturationSpec};
use crate::config::{FamilyName, ModelSpec, Overrides, PriorName, RunConfig};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<tallmh::Error> for CliError {
    fn from(e: tallmh::Error) -> Self {
        match e {
            tallmh::Error::InvalidInput(_) | tallmh::Error::DimensionMismatch { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "tallmh",
    version,
    about = "Subsampling Metropolis-Hastings experiments for tall data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum KindArg {
    #[value(name = "gaussian_1d")]
    Gaussian1d,
    #[value(name = "lognormal_1d")]
    Lognormal1d,
    LogisticTwoGaussians,
    GammaFromCovariates,
    CovtypeLike,
}

impl From<KindArg> for SyntheticKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Gaussian1d => SyntheticKind::Gaussian1d,
            KindArg::Lognormal1d => SyntheticKind::Lognormal1d,
            KindArg::LogisticTwoGaussians => SyntheticKind::LogisticTwoGaussians,
            KindArg::GammaFromCovariates => SyntheticKind::GammaFromCovariates,
            KindArg::CovtypeLike => SyntheticKind::CovtypeLike,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Logistic,
    Gamma,
}

impl From<FamilyArg> for FamilyName {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => FamilyName::Gaussian,
            FamilyArg::Logistic => FamilyName::Logistic,
            FamilyArg::Gamma => FamilyName::Gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum EstimatorArg {
    Unbiased,
    Biased,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset store.
    Generate {
        #[arg(long, value_enum, required_unless_present = "spec")]
        kind: Option<KindArg>,
        #[arg(long, required_unless_present = "spec")]
        n: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Full generator spec as JSON; replaces --kind/--n/--seed.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse a delimited file into a dataset store.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated roles: feature, label, response, ignore.
        #[arg(long)]
        roles: Option<String>,
        #[arg(long)]
        standardize: bool,
        #[arg(long)]
        intercept: bool,
        #[arg(long)]
        header: bool,
        /// Keep a uniform random subset of this many records.
        #[arg(long)]
        subset: Option<usize>,
        #[arg(long, default_value_t = 1)]
        subset_seed: u64,
    },
    /// Run a sampler from a JSON config; flags override config keys.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[arg(long)]
        sampler: Option<String>,
        #[arg(long)]
        n_iter: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Autocorrelation, Gelman-Rubin, evaluation summaries and comparisons.
    Diagnose {
        #[arg(long = "trace", required = true)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        max_lag: usize,
        #[arg(long, default_value_t = 0)]
        burn_in: usize,
    },
    /// Confidence-sampler cost across dataset sizes.
    Saturation {
        #[arg(long, value_enum, default_value = "logistic")]
        family: FamilyArg,
        #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        n_iter: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Rebuild the proxy every ALPHA iterations instead of keeping one at the MAP.
        #[arg(long)]
        alpha: Option<usize>,
        #[arg(long)]
        no_proxy: bool,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare labelled traces (LABEL=PATH, first is the reference), or
    /// tabulate the naive-subsampling targets on a grid.
    Compare {
        #[arg(long = "trace")]
        traces: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        /// Dataset for the naive-subsampling table (gaussian model, grid over μ).
        #[arg(long)]
        naive_dataset: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        #[arg(long, value_enum, default_value = "biased")]
        estimator: EstimatorArg,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        grid_lo: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        grid_hi: f64,
        #[arg(long, default_value_t = 41)]
        grid_points: usize,
        /// Fixed log σ of the grid.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        log_sigma: f64,
        #[arg(long, default_value_t = 2000)]
        n_mc: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Executes `cli`, printing a short report on stdout.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate {
            kind,
            n,
            seed,
            spec,
            out,
        } => {
            let spec = match spec {
                Some(p) => read_json(&p)?,
                None => match (kind, n) {
                    (Some(k), Some(n)) => SyntheticSpec::new(k.into(), n, seed),
                    _ => return Err(CliError::Usage("--kind and --n are required without --spec".into())),
                },
            };
            let d = commands::cmd_generate(&spec, &out)?;
            println!("wrote {} (n = {}, d = {})", out.display(), d.n(), d.d());
        }
        Command::Ingest {
            input,
            out,
            roles,
            standardize,
            intercept,
            header,
            subset,
            subset_seed,
        } => {
            let spec = PreprocessSpec {
                column_roles: roles
                    .as_deref()
                    .map(commands::parse_roles)
                    .transpose()?
                    .unwrap_or_default(),
                standardize,
                add_intercept: intercept,
                has_header: header,
                ..Default::default()
            };
            let d = commands::cmd_ingest(&input, &spec, subset, subset_seed, &out)?;
            println!("wrote {} (n = {}, d = {})", out.display(), d.n(), d.d());
        }
        Command::Run {
            config,
            dataset,
            family,
            sampler,
            n_iter,
            seed,
            output,
            chains,
        } => {
            let overrides = Overrides {
                dataset,
                family: family.map(Into::into),
                sampler,
                n_iter,
                seed,
                output,
                chains,
            };
            let cfg = RunConfig::load(config.as_deref(), &overrides)?;
            for p in commands::cmd_run(&cfg)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Diagnose {
            traces,
            reference,
            out,
            max_lag,
            burn_in,
        } => {
            let r = commands::cmd_diagnose(&traces, reference.as_deref(), &out, max_lag, burn_in)?;
            match &r.gelman_rubin {
                Some(v) => println!("gelman-rubin: {v:?}"),
                None => println!("gelman-rubin: omitted (needs at least two chains)"),
            }
            for (c, s) in r.summaries.iter().enumerate() {
                println!(
                    "chain {c}: mean L/n {:.4}, median L/n {:.4}",
                    s.mean_fraction, s.median_fraction
                );
            }
            println!("reports in {}", out.display());
        }
        Command::Saturation {
            family,
            sizes,
            n_iter,
            seed,
            alpha,
            no_proxy,
            delta,
            out,
        } => {
            let spec = SaturationSpec {
                family: family.into(),
                sizes,
                n_iter,
                seed,
                proxy: commands::proxy_choice(alpha, no_proxy),
                delta,
            };
            for r in commands::cmd_saturation(&spec, &out)? {
                println!(
                    "n = {}: median L = {}, median log10(L/n) = {:.3}",
                    r.n, r.median_evals, r.median_log10_fraction
                );
            }
        }
        Command::Compare {
            traces,
            out,
            bins,
            naive_dataset,
            lambda,
            estimator,
            grid_lo,
            grid_hi,
            grid_points,
            log_sigma,
            n_mc,
            seed,
        } => {
            if let Some(dataset) = naive_dataset {
                if grid_points < 2 || grid_hi.is_nan() || grid_lo.is_nan() || grid_hi <= grid_lo {
                    return Err(CliError::Usage(
                        "grid needs at least two points and grid-hi > grid-lo".into(),
                    ));
                }
                let step = (grid_hi - grid_lo) / (grid_points - 1) as f64;
                let spec = NaiveSpec {
                    dataset,
                    model: ModelSpec {
                        family: FamilyName::Gaussian,
                        kappa: 2.0,
                        prior: PriorName::Flat,
                        trust_radius: 1.0,
                    },
                    lambda,
                    estimator: match estimator {
                        EstimatorArg::Unbiased => NaiveEstimator::Unbiased,
                        EstimatorArg::Biased => NaiveEstimator::Biased,
                    },
                    grid: (0..grid_points)
                        .map(|k| Theta::from_vec(vec![grid_lo + step * k as f64, log_sigma]))
                        .collect(),
                    n_mc,
                    seed,
                };
                let (vt, vi) = commands::cmd_naive(&spec, &out)?;
                println!("grid variance of mu: target {vt:.6e}, induced {vi:.6e}");
            } else {
                let labelled = traces
                    .iter()
                    .map(|s| {
                        s.split_once('=')
                            .map(|(l, p)| (l.to_string(), PathBuf::from(p)))
                            .ok_or_else(|| CliError::Usage(format!("expected LABEL=PATH, got `{s}`")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                commands::cmd_compare(&labelled, &out, bins)?;
                println!("comparison written to {}", out.display());
            }
        }
    }
    Ok(())
}
