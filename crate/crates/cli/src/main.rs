//! `quantlik`: simulate quantized data, evaluate and maximize its exact
//! likelihood, and run the verification suite.

mod config;
mod figures;
mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use quantlik::estimate::{fit, fit_ignoring_quantization, FitReport};
use quantlik::quantizer::QuantizerSpec;
use quantlik::suite::{run_suite, SuiteConfig};
use quantlik::{dataset_loglik, simulate_codes, LikelihoodValue, McSettings, Scale};
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "quantlik",
    version,
    about = "Exact likelihoods of quantized observations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Random seed; overrides the configuration.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output path; overrides the configuration.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw quantized observations from the configured model.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the dataset log-likelihood at the configured parameters.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Codes CSV; overrides the configuration.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        /// Evaluate by Monte Carlo with this many draws per observation.
        #[arg(long, value_name = "N")]
        mc_count: Option<usize>,
    },
    /// Maximum-likelihood fit of location (and scale).
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        /// Also run the estimator that treats bin midpoints as exact data.
        #[arg(long)]
        ignore_quantization: bool,
    },
    /// Run the verification suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Run a single claim.
        #[arg(long, value_name = "TESTID")]
        only: Option<String>,
        /// Monte-Carlo draws for the probability estimates.
        #[arg(long, value_name = "N")]
        mc_count: Option<usize>,
    },
    /// Write the point clouds behind the quantizer, Minkowski and matrix-hull
    /// figures.
    Figures {
        #[command(flatten)]
        common: Common,
    },
}

/// Exit status for a command that ran to completion.
enum Status {
    Ok,
    NotConverged,
    ClaimsFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => ExitCode::from(2),
        Ok(Status::ClaimsFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Simulate { common } => simulate(&common),
        Command::Eval {
            common,
            data,
            mc_count,
        } => eval(&common, data, mc_count),
        Command::Fit {
            common,
            data,
            ignore_quantization,
        } => fit_cmd(&common, data, ignore_quantization),
        Command::Verify {
            common,
            only,
            mc_count,
        } => verify(&common, only, mc_count),
        Command::Figures { common } => figures_cmd(&common),
    }
}

fn out_path(common: &Common, cfg: &RunConfig) -> Option<PathBuf> {
    common
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(|p| cfg.resolve(p)))
}

fn data_path(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    flag.or_else(|| cfg.data.as_ref().map(|p| cfg.resolve(p)))
        .context("no data file given (use --data or the config's \"data\")")
}

#[derive(Serialize)]
struct Sidecar<'a> {
    noise: &'a str,
    quantizer: QuantizerSpec,
    s: Vec<Vec<f64>>,
    x: &'a [f64],
    scale: &'a Scale,
    count: usize,
    seed: u64,
}

fn simulate(common: &Common) -> Result<Status> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let seed = common
        .seed
        .or(cfg.seed)
        .context("simulate needs a seed (--seed or the config's \"seed\")")?;
    let out = out_path(common, &cfg).context("simulate needs an output path (--out)")?;
    let count = cfg.count.context("config has no observation \"count\"")?;
    let model = cfg.model()?;
    let noise = cfg.noise(model.n())?;
    let q = cfg.quantizer()?;
    let codes = simulate_codes(&model, &noise, &q, count, seed)?;
    let width = codes.first().map_or(0, |c| c.0.len());
    io::write_atomic(&out, &io::codes_csv(&codes, width)?)?;
    let s = model.s();
    let sidecar = Sidecar {
        noise: noise.family().name(),
        quantizer: q.into(),
        s: (0..s.nrows())
            .map(|r| s.row(r).iter().copied().collect())
            .collect(),
        x: model.x(),
        scale: model.scale(),
        count,
        seed,
    };
    io::write_atomic(&sidecar_path(&out), &io::json_bytes(&sidecar)?)?;
    Ok(Status::Ok)
}

/// `data.csv` → `data.csv.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct EvalReport {
    observations: usize,
    loglik: LikelihoodValue,
}

fn eval(common: &Common, data: Option<PathBuf>, mc_count: Option<usize>) -> Result<Status> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let codes = io::read_codes(&data_path(data, &cfg)?)?;
    let model = cfg.model()?;
    let noise = cfg.noise(model.n())?;
    let q = cfg.quantizer()?;
    let mc = match (mc_count, cfg.mc) {
        (Some(count), mc) => {
            let seed = common
                .seed
                .or(mc.map(|m| m.seed))
                .or(cfg.seed)
                .context("Monte-Carlo evaluation needs a seed")?;
            Some(McSettings { count, seed })
        }
        (None, Some(mc)) => Some(McSettings {
            count: mc.count,
            seed: common.seed.unwrap_or(mc.seed),
        }),
        (None, None) => None,
    };
    let loglik = dataset_loglik(&model, &noise, &q, &codes, mc.as_ref())?;
    io::emit_json(
        out_path(common, &cfg).as_deref(),
        &EvalReport {
            observations: codes.len(),
            loglik,
        },
    )?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct Comparison {
    quantization_aware: FitReport,
    ignoring_quantization: FitReport,
}

fn fit_cmd(common: &Common, data: Option<PathBuf>, ignore_quantization: bool) -> Result<Status> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let codes = io::read_codes(&data_path(data, &cfg)?)?;
    let template = cfg.template()?;
    let fit_cfg = cfg.fit_config()?;
    let report = fit(&template, &codes, &fit_cfg)?;
    let status = if report.converged {
        Status::Ok
    } else {
        Status::NotConverged
    };
    let out = out_path(common, &cfg);
    if ignore_quantization {
        let baseline = fit_ignoring_quantization(&template, &codes, &fit_cfg)?;
        io::emit_json(
            out.as_deref(),
            &Comparison {
                quantization_aware: report,
                ignoring_quantization: baseline,
            },
        )?;
    } else {
        io::emit_json(out.as_deref(), &report)?;
    }
    Ok(status)
}

fn verify(common: &Common, only: Option<String>, mc_count: Option<usize>) -> Result<Status> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let mut suite = match (cfg.suite.clone(), common.seed.or(cfg.seed)) {
        (Some(mut s), seed) => {
            if let Some(seed) = seed {
                s.seed = seed;
            }
            s
        }
        (None, Some(seed)) => SuiteConfig::new(seed),
        (None, None) => bail!("verify needs a seed (--seed or the config's \"seed\")"),
    };
    if only.is_some() {
        suite.only = only;
    }
    if let Some(n) = mc_count {
        suite.mc_count = n;
        suite.prekopa_mc_count = n;
    }
    let report = run_suite(&suite)?;
    io::emit_json(out_path(common, &cfg).as_deref(), &report)?;
    Ok(if report.all_passed {
        Status::Ok
    } else {
        Status::ClaimsFailed
    })
}

fn figures_cmd(common: &Common) -> Result<Status> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    let dir = out_path(common, &cfg).unwrap_or_else(|| PathBuf::from("figures"));
    for (name, sets) in figures::all(seed)? {
        let mut buf = Vec::new();
        quantlik::geometry::write_point_csv(&mut buf, &sets)?;
        io::write_atomic(&dir.join(format!("{name}.csv")), &buf)?;
    }
    Ok(Status::Ok)
}
