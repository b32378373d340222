//! Run configuration: a TOML file, mirrored by CLI flags that override it.

use std::path::{Path, PathBuf};

use rlbench_core::ddpg::{Architecture, DdpgConfig, OuParams};
use rlbench_core::discretizer::{DEFAULT_CLIP, DEFAULT_SAMPLE_BUDGET};
use rlbench_core::mlp::Activation;
use rlbench_core::tabular::{TdAlgorithm, TdConfig};
use serde::{Deserialize, Serialize};

use crate::bridge::{BridgeSpec, Transport, DEFAULT_TIMEOUT_MS};
use crate::harness::HarnessError;

pub const SEED_ENV_VAR: &str = "RLBENCH_SEED";
pub const DEFAULT_WINDOW: usize = 10;

/// Learning-rate presets for sweeps.
pub const ALPHAS_TABULAR: [f64; 8] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const ALPHAS_FIGURE: [f64; 5] = [0.01, 0.05, 0.1, 0.5, 1.0];

pub const ARCH_FORMER: [usize; 2] = [32, 16];
pub const ARCH_LATTER: [usize; 4] = [32, 64, 32, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    QLearning,
    Sarsa,
    Ddpg,
}

impl std::str::FromStr for Algo {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qlearning" => Ok(Algo::QLearning),
            "sarsa" => Ok(Algo::Sarsa),
            "ddpg" => Ok(Algo::Ddpg),
            other => Err(HarnessError::Config(format!("unknown algo {other:?}; use qlearning, sarsa or ddpg"))),
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algo::QLearning => "qlearning",
            Algo::Sarsa => "sarsa",
            Algo::Ddpg => "ddpg",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularSettings {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon0: f64,
    pub epsilon_min: f64,
    pub action_buckets: usize,
    pub state_buckets: usize,
    pub sample_budget: usize,
    pub clip: f64,
    pub state_dim_cap: usize,
    pub action_table_cap: usize,
    pub table_cell_cap: usize,
    pub init_value: f64,
}

impl Default for TabularSettings {
    fn default() -> Self {
        let td = TdConfig::default();
        Self {
            alpha: td.alpha,
            gamma: td.gamma,
            epsilon0: td.epsilon0,
            epsilon_min: td.epsilon_min,
            action_buckets: td.action_buckets,
            state_buckets: 2,
            sample_budget: DEFAULT_SAMPLE_BUDGET,
            clip: DEFAULT_CLIP,
            state_dim_cap: td.state_dim_cap,
            action_table_cap: td.action_table_cap,
            table_cell_cap: td.table_cell_cap,
            init_value: td.init_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgSettings {
    pub gamma: f64,
    pub tau: f64,
    pub batch_n: usize,
    pub actor_batch: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub warmup_steps: usize,
    pub capacity: usize,
    pub mask_terminal: bool,
    pub ou: OuParams,
}

impl Default for DdpgSettings {
    fn default() -> Self {
        let d = DdpgConfig::default();
        Self {
            gamma: d.gamma,
            tau: d.tau,
            batch_n: d.batch_n,
            actor_batch: d.actor_batch,
            actor_lr: d.actor_lr,
            critic_lr: d.critic_lr,
            warmup_steps: d.warmup_steps,
            capacity: d.capacity,
            mask_terminal: d.mask_terminal,
            ou: d.ou,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchSettings {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub dropout: f64,
}

impl Default for ArchSettings {
    fn default() -> Self {
        Self {
            hidden: ARCH_FORMER.to_vec(),
            activation: Activation::Relu,
            dropout: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BridgeSettings {
    /// `stdio` or `tcp:HOST:PORT`.
    pub transport: String,
    pub env_name: String,
    pub timeout_ms: u64,
}

impl Default for BridgeSettings {
    fn default() -> Self {
        Self {
            transport: "stdio".into(),
            env_name: String::new(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algo: Algo,
    /// `reacher`, `idp`, `toy`, `chain` or `bridge:<launch command>`.
    pub env: String,
    pub episodes: usize,
    /// Step limit per episode; the environment's own limit when absent.
    pub steps: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    pub smoothing_window: usize,
    pub tabular: TabularSettings,
    pub ddpg: DdpgSettings,
    pub arch: ArchSettings,
    pub bridge: BridgeSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algo: Algo::QLearning,
            env: "toy".into(),
            episodes: 500,
            steps: None,
            seed: 0,
            out: PathBuf::from("runs/latest"),
            smoothing_window: DEFAULT_WINDOW,
            tabular: TabularSettings::default(),
            ddpg: DdpgSettings::default(),
            arch: ArchSettings::default(),
            bridge: BridgeSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvChoice {
    Reacher,
    Idp,
    Toy,
    Chain,
    Bridge(BridgeSpec),
}

pub const CHAIN_STATES: usize = 5;

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(format!("invalid config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies the seed override from the environment, if set.
    pub fn apply_seed_env(&mut self) -> Result<(), HarnessError> {
        if let Ok(v) = std::env::var(SEED_ENV_VAR) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|e| HarnessError::Config(format!("{SEED_ENV_VAR}={v:?} is not a seed: {e}")))?;
        }
        Ok(())
    }

    /// Sets the learning rate: the TD step size for tabular runs, both
    /// network learning rates for DDPG.
    pub fn set_alpha(&mut self, alpha: f64) {
        match self.algo {
            Algo::QLearning | Algo::Sarsa => self.tabular.alpha = alpha,
            Algo::Ddpg => {
                self.ddpg.actor_lr = alpha;
                self.ddpg.critic_lr = alpha;
            }
        }
    }

    pub fn set_gamma(&mut self, gamma: f64) {
        match self.algo {
            Algo::QLearning | Algo::Sarsa => self.tabular.gamma = gamma,
            Algo::Ddpg => self.ddpg.gamma = gamma,
        }
    }

    pub fn env_choice(&self) -> Result<EnvChoice, HarnessError> {
        match self.env.as_str() {
            "reacher" => Ok(EnvChoice::Reacher),
            "idp" => Ok(EnvChoice::Idp),
            "toy" => Ok(EnvChoice::Toy),
            "chain" => Ok(EnvChoice::Chain),
            other => {
                let command = other.strip_prefix("bridge:").ok_or_else(|| {
                    HarnessError::Config(format!(
                        "unknown env {other:?}; use reacher, idp, toy, chain or bridge:<command>"
                    ))
                })?;
                let transport: Transport = self.bridge.transport.parse().map_err(|e: crate::bridge::BridgeError| HarnessError::Config(e.to_string()))?;
                let spec = BridgeSpec {
                    command: command.trim().to_owned(),
                    env_name: self.bridge.env_name.clone(),
                    transport,
                    timeout_ms: self.bridge.timeout_ms,
                };
                spec.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
                Ok(EnvChoice::Bridge(spec))
            }
        }
    }

    pub fn td_config(&self, steps_per_episode: usize) -> TdConfig {
        let t = &self.tabular;
        TdConfig {
            alpha: t.alpha,
            gamma: t.gamma,
            episodes: self.episodes,
            steps_per_episode,
            epsilon0: t.epsilon0,
            epsilon_min: t.epsilon_min,
            action_buckets: t.action_buckets,
            state_dim_cap: t.state_dim_cap,
            action_table_cap: t.action_table_cap,
            table_cell_cap: t.table_cell_cap,
            init_value: t.init_value,
        }
    }

    pub fn ddpg_config(&self, steps_per_episode: usize) -> DdpgConfig {
        let d = &self.ddpg;
        DdpgConfig {
            gamma: d.gamma,
            tau: d.tau,
            batch_n: d.batch_n,
            actor_batch: d.actor_batch,
            actor_lr: d.actor_lr,
            critic_lr: d.critic_lr,
            warmup_steps: d.warmup_steps,
            capacity: d.capacity,
            episodes: self.episodes,
            steps_per_episode,
            mask_terminal: d.mask_terminal,
            ou: d.ou,
        }
    }

    pub fn architecture(&self, obs_dim: usize, act_dim: usize) -> Architecture {
        Architecture::from_hidden(obs_dim, act_dim, &self.arch.hidden, self.arch.activation, self.arch.dropout)
    }

    pub fn td_algorithm(&self) -> Option<TdAlgorithm> {
        match self.algo {
            Algo::QLearning => Some(TdAlgorithm::QLearning),
            Algo::Sarsa => Some(TdAlgorithm::Sarsa),
            Algo::Ddpg => None,
        }
    }

    /// Checks everything that can be checked without touching an environment.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg_err = |e: rlbench_core::Error| HarnessError::Config(e.to_string());
        self.env_choice()?;
        if self.smoothing_window == 0 {
            return Err(HarnessError::Config("smoothing_window must be at least 1".into()));
        }
        if self.steps == Some(0) {
            return Err(HarnessError::Config("steps must be at least 1".into()));
        }
        match self.algo {
            Algo::QLearning | Algo::Sarsa => {
                self.td_config(1).validate().map_err(cfg_err)?;
                if self.tabular.state_buckets < 2 {
                    return Err(HarnessError::Config("state_buckets must be at least 2".into()));
                }
                if self.tabular.sample_budget < 2 {
                    return Err(HarnessError::Config("sample_budget must be at least 2".into()));
                }
                if !(self.tabular.clip > 0.0) {
                    return Err(HarnessError::Config("clip must be positive".into()));
                }
            }
            Algo::Ddpg => {
                self.ddpg_config(1).validate().map_err(cfg_err)?;
                if !(0.0..1.0).contains(&self.arch.dropout) {
                    return Err(HarnessError::Config("dropout must lie in [0, 1)".into()));
                }
                if self.arch.hidden.contains(&0) {
                    return Err(HarnessError::Config("hidden layer sizes must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Parses `32,64,32,16` into layer sizes.
pub fn parse_arch(s: &str) -> Result<Vec<usize>, HarnessError> {
    match s.trim() {
        "former" => return Ok(ARCH_FORMER.to_vec()),
        "latter" => return Ok(ARCH_LATTER.to_vec()),
        "" => return Ok(Vec::new()),
        _ => {}
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| HarnessError::Config(format!("bad layer size {p:?} in --arch")))
        })
        .collect()
}
