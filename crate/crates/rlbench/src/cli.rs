//! `rlbench` command line: `train`, `sweep` and `plotdata`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rlbench_core::mlp::Activation;

use crate::config::{parse_arch, Algo, RunConfig};
use crate::harness::{self, HarnessError};

#[derive(Debug, Parser)]
#[command(name = "rlbench", version, about = "Tabular and DDPG experiments on built-in or bridged environments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run one experiment.
    Train(RunArgs),
    /// Run the cross product of learning rates and seeds.
    Sweep(SweepArgs),
    /// Write a two-column gnuplot file from a run directory.
    Plotdata {
        run_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML file with defaults for every option below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<String>,
    /// reacher, idp, toy, chain or bridge:<launch command>.
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Step limit per episode.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// TD step size, or both network learning rates for ddpg.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Hidden layer sizes, e.g. 32,64,32,16 (or `former` / `latter`).
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Smoothing window for the smoothed_return column.
    #[arg(long)]
    window: Option<usize>,
    /// stdio or tcp:HOST:PORT.
    #[arg(long)]
    bridge_transport: Option<String>,
    /// Environment name passed to the bridge server as --env.
    #[arg(long)]
    bridge_env: Option<String>,
    #[arg(long)]
    bridge_timeout_ms: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated learning rates, or `tabular` / `figure` presets.
    #[arg(long)]
    alphas: String,
    /// Comma-separated seeds; defaults to the run seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Concurrent runs; defaults to the number of processors.
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_activation(s: &str) -> Result<Activation, HarnessError> {
    match s {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        "linear" => Ok(Activation::Linear),
        other => Err(HarnessError::Config(format!("unknown activation {other:?}"))),
    }
}

fn parse_alphas(s: &str) -> Result<Vec<f64>, HarnessError> {
    match s {
        "tabular" => return Ok(crate::config::ALPHAS_TABULAR.to_vec()),
        "figure" => return Ok(crate::config::ALPHAS_FIGURE.to_vec()),
        _ => {}
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| HarnessError::Config(format!("bad alpha {p:?}: {e}")))
        })
        .collect()
}

/// Resolution order: defaults, config file, `RLBENCH_SEED`, flags.
fn build_config(a: &RunArgs) -> Result<RunConfig, HarnessError> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_seed_env()?;
    if let Some(v) = &a.algo {
        cfg.algo = v.parse::<Algo>()?;
    }
    if let Some(v) = &a.env {
        cfg.env = v.clone();
    }
    if let Some(v) = a.episodes {
        cfg.episodes = v;
    }
    if let Some(v) = a.steps {
        cfg.steps = Some(v);
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.alpha {
        cfg.set_alpha(v);
    }
    if let Some(v) = a.gamma {
        cfg.set_gamma(v);
    }
    if let Some(v) = a.tau {
        cfg.ddpg.tau = v;
    }
    if let Some(v) = &a.arch {
        cfg.arch.hidden = parse_arch(v)?;
    }
    if let Some(v) = &a.activation {
        cfg.arch.activation = parse_activation(v)?;
    }
    if let Some(v) = a.dropout {
        cfg.arch.dropout = v;
    }
    if let Some(v) = a.window {
        cfg.smoothing_window = v;
    }
    if let Some(v) = &a.bridge_transport {
        cfg.bridge.transport = v.clone();
    }
    if let Some(v) = &a.bridge_env {
        cfg.bridge.env_name = v.clone();
    }
    if let Some(v) = a.bridge_timeout_ms {
        cfg.bridge.timeout_ms = v;
    }
    if let Some(v) = &a.out {
        cfg.out = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Cmd) -> Result<(), HarnessError> {
    match cmd {
        Cmd::Train(args) => {
            let cfg = build_config(&args)?;
            let art = harness::run_experiment(&cfg)?;
            let fin = art.final_smoothed().map(harness::format_float).unwrap_or_else(|| "n/a".into());
            println!(
                "{} on {}: {} episodes, final smoothed return {fin}, output in {}",
                cfg.algo,
                cfg.env,
                art.logs.len(),
                art.dir.display()
            );
            Ok(())
        }
        Cmd::Sweep(args) => {
            let mut cfg = build_config(&args.run)?;
            let alphas = parse_alphas(&args.alphas)?;
            let seeds = if args.seeds.is_empty() { vec![cfg.seed] } else { args.seeds.clone() };
            let jobs = match args.jobs {
                Some(0) => return Err(HarnessError::Config("--jobs must be at least 1".into())),
                Some(j) => j,
                None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            };
            if args.run.out.is_none() && args.run.config.is_none() {
                cfg.out = PathBuf::from("runs/sweep");
            }
            let report = harness::sweep(&cfg, &alphas, &seeds, jobs)?;
            println!(
                "{} runs, {} failed; summary in {}",
                report.runs.len(),
                report.failures(),
                report.summary_path.display()
            );
            for run in report.runs.iter().filter(|r| r.result.is_err()) {
                if let Err(e) = &run.result {
                    eprintln!("alpha {} seed {}: {e}", run.alpha, run.seed);
                }
            }
            if report.failures() > 0 {
                return Err(HarnessError::Runtime(format!("{} sweep runs failed", report.failures())));
            }
            Ok(())
        }
        Cmd::Plotdata { run_dir } => {
            let out = harness::plotdata(&run_dir)?;
            println!("{}", out.display());
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rlbench: {e}");
            e.exit_code()
        }
    }
}
