use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcmcbench::datagen::Covariates;
use mcmcbench::harness::{emit_report, emit_sweep, repeated_datasets, run, write_report, ExperimentConfig, Format};
use mcmcbench::model::{Family, Parameterization, Prior};
use mcmcbench::samplers::Backend;
use mcmcbench::{Error, Result};

#[derive(Parser)]
#[command(name = "mcmcbench", version, about = "Benchmark MCMC samplers on simulated Bayesian models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every backend on one simulated dataset (or K parallel chains).
    Run(ExperimentArgs),
    /// Repeat the experiment on `--repeats` independently simulated datasets.
    Sweep(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<Family>,
    #[arg(long)]
    prior: Option<Prior>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Mixture components.
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    covariates: Option<Covariates>,
    /// Number of trailing coefficients set to zero.
    #[arg(long)]
    zero_pattern: Option<usize>,
    /// Expected censored fraction (AFT).
    #[arg(long)]
    k: Option<f64>,
    /// Comma-separated list of gibbs, nuts, rwmh.
    #[arg(long, value_delimiter = ',')]
    backends: Option<Vec<Backend>>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    niter: Option<usize>,
    #[arg(long)]
    nburn: Option<usize>,
    #[arg(long)]
    nthin: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Mixture parameterization for gibbs and rwmh.
    #[arg(long)]
    parameterization: Option<Parameterization>,
    /// Output directory; reports go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
}

impl ExperimentArgs {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => {
                let prior = self.prior.ok_or_else(|| Error::Config("--prior is required without --config".into()))?;
                ExperimentConfig::new(prior)
            }
        };
        macro_rules! overlay {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })*
            };
        }
        overlay!(prior => prior, n => n, p => p, h => h, covariates => covariates, zero_pattern => zero_pattern,
            k => k, backends => backends, chains => chains, seed => seed, repeats => repeats, format => format);
        macro_rules! overlay_opt {
            ($($flag:ident => $field:ident),*) => {
                $(if self.$flag.is_some() { cfg.$field = self.$flag; })*
            };
        }
        overlay_opt!(model => model, niter => n_iter, nburn => n_burn, nthin => n_thin, workers => workers,
            parameterization => parameterization, out => out);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let reports = run(&cfg)?;
            match &cfg.out {
                Some(dir) => println!("{}", emit_report(&reports, cfg.format, dir)?.display()),
                None => write_report(&reports, cfg.format, std::io::stdout().lock())?,
            }
        }
        Command::Sweep(args) => {
            let cfg = args.resolve()?;
            let sweep = repeated_datasets(&cfg)?;
            match &cfg.out {
                Some(dir) => {
                    for path in emit_sweep(&sweep, cfg.format, dir)? {
                        println!("{}", path.display());
                    }
                }
                None => write_report(&sweep.rows, cfg.format, std::io::stdout().lock())?,
            }
        }
    }
    Ok(())
}

fn fail(kind: &str, message: String) -> ExitCode {
    let record = serde_json::json!({ "error": kind, "message": message });
    let _ = writeln!(std::io::stderr(), "{record}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => return fail("usage", e.to_string()),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string()),
    }
}
