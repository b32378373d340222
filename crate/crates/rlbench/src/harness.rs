//! Experiment runner: one run writes a self-contained output directory;
//! sweeps fan independent runs out over a worker pool.
//!
//! Run directory layout:
//!
//! * `config.json` resolved configuration
//! * `episodes.csv` one row per completed episode
//! * `range_spec.json`, `qtable.bin` (tabular) or `agent.ckpt` (DDPG)
//! * `run_status.json` outcome, written last
//! * `meta.json` wall-clock timings, the only nondeterministic file

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use rlbench_core::ddpg::ddpg_train;
use rlbench_core::discretizer::{collect_observations, fit_ranges};
use rlbench_core::envs::idp::IdpParams;
use rlbench_core::envs::reacher::ReacherParams;
use rlbench_core::envs::{ChainWalk, DoublePendulumCart, Environment, MoveToOrigin, Reacher};
use rlbench_core::tabular::train_tabular;
use rlbench_core::{EpisodeLog, SeededRng};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bridge::BridgeEnv;
use crate::config::{Algo, EnvChoice, RunConfig, CHAIN_STATES};
use crate::formats;

pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const EPISODES_CSV: &str = "episodes.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const PLOT_FILE: &str = "plot.dat";
const CSV_HEADER: [&str; 5] = ["episode", "return", "smoothed_return", "epsilon_or_noise_scale", "steps"];

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("run failed: {0}")]
    Runtime(String),
    #[error("io error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Format(#[from] formats::FormatError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}

impl From<rlbench_core::Error> for HarnessError {
    fn from(e: rlbench_core::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_owned(), source }
}

/// Left-truncated moving average: `out[i]` is the mean of the last
/// `window` values up to and including `xs[i]`.
pub fn moving_average(xs: &[f64], window: usize) -> Result<Vec<f64>, HarnessError> {
    if window == 0 {
        return Err(HarnessError::Config("smoothing window must be at least 1".into()));
    }
    Ok((0..xs.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let span = &xs[lo..=i];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect())
}

/// Builds the environment named by the config; `steps` overrides the
/// built-in episode limit.
pub fn make_env(choice: &EnvChoice, steps: Option<usize>) -> Result<Box<dyn Environment + Send>, HarnessError> {
    Ok(match choice {
        EnvChoice::Reacher => {
            let d = ReacherParams::default();
            Box::new(Reacher::new(ReacherParams { max_steps: steps.unwrap_or(d.max_steps), ..d })?)
        }
        EnvChoice::Idp => {
            let d = IdpParams::default();
            Box::new(DoublePendulumCart::new(IdpParams { max_steps: steps.unwrap_or(d.max_steps), ..d })?)
        }
        EnvChoice::Toy => Box::new(MoveToOrigin::new(steps.unwrap_or(50))?),
        EnvChoice::Chain => Box::new(ChainWalk::new(CHAIN_STATES, steps.unwrap_or(50))?),
        EnvChoice::Bridge(spec) => Box::new(BridgeEnv::connect(spec).map_err(|e| HarnessError::Runtime(e.to_string()))?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: usize,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub smoothed_return: f64,
    pub epsilon_or_noise_scale: f64,
    pub steps: usize,
}

/// Scientific notation with 17 significant digits, enough to round-trip.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_episodes_csv(path: &Path, logs: &[EpisodeLog], smoothed: &[f64]) -> Result<(), HarnessError> {
    let mut buf = format!("# schema_version={CSV_SCHEMA_VERSION}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(CSV_HEADER)?;
        for (i, (log, s)) in logs.iter().zip(smoothed).enumerate() {
            w.write_record([
                (i + 1).to_string(),
                format_float(log.episode_return),
                format_float(*s),
                format_float(log.exploration),
                log.steps.to_string(),
            ])?;
        }
        w.flush().map_err(io_err(path))?;
    }
    fs::write(path, buf).map_err(io_err(path))
}

pub fn read_episodes_csv(path: &Path) -> Result<Vec<EpisodeRow>, HarnessError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifact {
    pub dir: PathBuf,
    pub logs: Vec<EpisodeLog>,
    pub smoothed: Vec<f64>,
}

impl RunArtifact {
    pub fn final_smoothed(&self) -> Option<f64> {
        self.smoothed.last().copied()
    }

    pub fn mean_return(&self) -> Option<f64> {
        (!self.logs.is_empty())
            .then(|| self.logs.iter().map(|l| l.episode_return).sum::<f64>() / self.logs.len() as f64)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn unix_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Executes one configured run, writing everything into `cfg.out`.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunArtifact, HarnessError> {
    cfg.validate()?;
    let dir = cfg.out.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_json(&dir.join("config.json"), cfg)?;
    let started = unix_ms();
    let clock = Instant::now();
    let status_path = dir.join("run_status.json");
    let _ = fs::remove_file(&status_path);
    let outcome = train_into(cfg, &dir);
    let meta = json!({
        "started_unix_ms": started as u64,
        "wall_clock_seconds": clock.elapsed().as_secs_f64(),
        "rlbench_version": env!("CARGO_PKG_VERSION"),
    });
    write_json(&dir.join("meta.json"), &meta)?;
    match outcome {
        Ok(logs) => {
            let returns: Vec<f64> = logs.iter().map(|l| l.episode_return).collect();
            let smoothed = moving_average(&returns, cfg.smoothing_window)?;
            write_episodes_csv(&dir.join(EPISODES_CSV), &logs, &smoothed)?;
            write_json(&status_path, &json!({ "status": "ok", "episodes_completed": logs.len(), "error": null }))?;
            Ok(RunArtifact { dir, logs, smoothed })
        }
        Err(e) => {
            write_json(&status_path, &json!({ "status": "failed", "episodes_completed": 0, "error": e.to_string() }))?;
            Err(e)
        }
    }
}

fn train_into(cfg: &RunConfig, dir: &Path) -> Result<Vec<EpisodeLog>, HarnessError> {
    let mut env = make_env(&cfg.env_choice()?, cfg.steps)?;
    let steps = cfg.steps.unwrap_or(env.spec().max_steps);
    let mut rng = SeededRng::new(cfg.seed);
    match cfg.td_algorithm() {
        Some(algo) => {
            let t = &cfg.tabular;
            let samples = collect_observations(&mut env, t.sample_budget, &mut rng)?;
            let ranges = fit_ranges(&samples, -t.clip, t.clip, t.state_buckets)?;
            formats::write_range_spec(&dir.join("range_spec.json"), &ranges)?;
            let (table, logs) = train_tabular(&mut env, algo, &ranges, &cfg.td_config(steps), &mut rng)?;
            let path = dir.join("qtable.bin");
            fs::write(&path, formats::encode_qtable(&table)?).map_err(io_err(&path))?;
            Ok(logs)
        }
        None => {
            debug_assert_eq!(cfg.algo, Algo::Ddpg);
            let spec = env.spec().clone();
            let arch = cfg.architecture(spec.obs_dim(), spec.act_dim());
            let (agent, logs) = ddpg_train(&mut env, &cfg.ddpg_config(steps), &arch, &mut rng)?;
            let path = dir.join("agent.ckpt");
            fs::write(&path, formats::encode_agent(&agent, logs.len(), rng.state())?).map_err(io_err(&path))?;
            Ok(logs)
        }
    }
}

#[derive(Debug)]
pub struct SweepRun {
    pub alpha: f64,
    pub seed: u64,
    pub dir: PathBuf,
    pub result: Result<RunArtifact, HarnessError>,
}

#[derive(Debug)]
pub struct SweepReport {
    pub runs: Vec<SweepRun>,
    pub summary_path: PathBuf,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.result.is_err()).count()
    }
}

pub fn run_dir_name(alpha: f64, seed: u64) -> String {
    format!("alpha_{alpha}_seed_{seed}")
}

/// Runs every `(alpha, seed)` pair under `base.out`, `jobs` at a time, and
/// writes `summary.csv`. Individual failures are recorded, not propagated.
pub fn sweep(base: &RunConfig, alphas: &[f64], seeds: &[u64], jobs: usize) -> Result<SweepReport, HarnessError> {
    if alphas.is_empty() || seeds.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one alpha and one seed".into()));
    }
    base.validate()?;
    let mut configs = Vec::with_capacity(alphas.len() * seeds.len());
    for &alpha in alphas {
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.set_alpha(alpha);
            cfg.seed = seed;
            cfg.out = base.out.join(run_dir_name(alpha, seed));
            cfg.validate()?;
            configs.push((alpha, seed, cfg));
        }
    }
    fs::create_dir_all(&base.out).map_err(io_err(&base.out))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Runtime(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<SweepRun> = pool.install(|| {
        configs
            .into_par_iter()
            .map(|(alpha, seed, cfg)| SweepRun {
                alpha,
                seed,
                dir: cfg.out.clone(),
                result: run_experiment(&cfg),
            })
            .collect()
    });
    let summary_path = base.out.join(SUMMARY_CSV);
    let mut w = csv::Writer::from_path(&summary_path)?;
    w.write_record(["alpha", "seed", "final_smoothed_return", "mean_return", "status"])?;
    for run in &runs {
        let (fin, mean, status) = match &run.result {
            Ok(a) => (
                a.final_smoothed().map(format_float).unwrap_or_default(),
                a.mean_return().map(format_float).unwrap_or_default(),
                "ok".to_owned(),
            ),
            Err(e) => (String::new(), String::new(), format!("failed: {e}")),
        };
        w.write_record([run.alpha.to_string(), run.seed.to_string(), fin, mean, status])?;
    }
    w.flush().map_err(io_err(&summary_path))?;
    Ok(SweepReport { runs, summary_path })
}

/// Writes `plot.dat` (episode, smoothed return; whitespace separated) into
/// the run directory and returns its path.
pub fn plotdata(run_dir: &Path) -> Result<PathBuf, HarnessError> {
    let csv_path = run_dir.join(EPISODES_CSV);
    if !csv_path.is_file() {
        return Err(HarnessError::Config(format!("{} has no {EPISODES_CSV}", run_dir.display())));
    }
    let rows = read_episodes_csv(&csv_path)?;
    let mut text = String::from("# episode smoothed_return\n");
    for r in rows {
        text.push_str(&format!("{} {}\n", r.episode, format_float(r.smoothed_return)));
    }
    let out = run_dir.join(PLOT_FILE);
    fs::write(&out, text).map_err(io_err(&out))?;
    Ok(out)
}
