//! Tabular temporal-difference control: Q-learning and SARSA over bucketed
//! observations and actions, with a per-episode epsilon schedule.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::discretizer::{decode_action, encode_prefix, joint_action_count, unflatten, RangeSpec};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::spaces::EpisodeLog;

/// Dense action-value table indexed by `(flat state, flat action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    init_value: f64,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize, init_value: f64) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidInput("Q-table dimensions must be positive".into()));
        }
        if !init_value.is_finite() {
            return Err(Error::InvalidInput("Q-table init value must be finite".into()));
        }
        let cells = n_states
            .checked_mul(n_actions)
            .ok_or_else(|| Error::Capacity("Q-table size overflows".into()))?;
        Ok(Self {
            n_states,
            n_actions,
            init_value,
            values: vec![init_value; cells],
        })
    }

    pub fn from_values(n_states: usize, n_actions: usize, init_value: f64, values: Vec<f64>) -> Result<Self> {
        let mut t = Self::new(n_states, n_actions, init_value)?;
        Error::check_dim(t.values.len(), values.len())?;
        t.values = values;
        Ok(t)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn init_value(&self) -> f64 {
        self.init_value
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(Error::InvalidInput(format!(
                "index (s={s}, a={a}) outside table {}x{}",
                self.n_states, self.n_actions
            )));
        }
        Ok(())
    }

    pub fn get(&self, s: usize, a: usize) -> Result<f64> {
        self.check(s, a)?;
        Ok(self.values[s * self.n_actions + a])
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) -> Result<()> {
        self.check(s, a)?;
        self.values[s * self.n_actions + a] = v;
        Ok(())
    }

    pub fn row(&self, s: usize) -> Result<&[f64]> {
        self.check(s, 0)?;
        Ok(&self.values[s * self.n_actions..(s + 1) * self.n_actions])
    }

    /// Greedy action with lowest-index tie-breaking.
    pub fn argmax(&self, s: usize) -> Result<usize> {
        let row = self.row(s)?;
        let mut best = 0;
        for (a, v) in row.iter().enumerate().skip(1) {
            if *v > row[best] {
                best = a;
            }
        }
        Ok(best)
    }

    pub fn max(&self, s: usize) -> Result<f64> {
        Ok(self.row(s)?[self.argmax(s)?])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TdAlgorithm {
    QLearning,
    Sarsa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TdConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub epsilon0: f64,
    pub epsilon_min: f64,
    /// Buckets per action dimension.
    pub action_buckets: usize,
    /// Observation dimensions beyond this many are left out of the state key.
    pub state_dim_cap: usize,
    /// Largest joint action count accepted.
    pub action_table_cap: usize,
    /// Largest total number of table entries accepted.
    pub table_cell_cap: usize,
    pub init_value: f64,
}

impl Default for TdConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            gamma: 0.99,
            episodes: 500,
            steps_per_episode: 1000,
            epsilon0: 0.99,
            epsilon_min: 0.01,
            action_buckets: 2,
            state_dim_cap: 16,
            action_table_cap: 1 << 16,
            table_cell_cap: 1 << 26,
            init_value: 0.0,
        }
    }
}

impl TdConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.into()));
        if !(self.alpha >= 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon0) || !(0.0..=1.0).contains(&self.epsilon_min) {
            return bad("epsilon values must lie in [0, 1]");
        }
        if self.action_buckets < 1 {
            return bad("action_buckets must be at least 1");
        }
        Ok(())
    }
}

/// `r + gamma * v_next - v`.
pub fn td_error(r: f64, gamma: f64, v_next: f64, v: f64) -> f64 {
    r + gamma * v_next - v
}

/// Q-learning update of `Q(s, a)`; `s_next = None` marks a terminal transition.
/// Returns the new value.
pub fn q_update(table: &mut QTable, s: usize, a: usize, r: f64, s_next: Option<usize>, cfg: &TdConfig) -> Result<f64> {
    let bootstrap = match s_next {
        Some(sn) => table.max(sn)?,
        None => 0.0,
    };
    apply_td(table, s, a, r, bootstrap, cfg)
}

/// SARSA update of `Q(s, a)` toward `r + gamma * Q(s', a')`.
pub fn sarsa_update(
    table: &mut QTable,
    s: usize,
    a: usize,
    r: f64,
    next: Option<(usize, usize)>,
    cfg: &TdConfig,
) -> Result<f64> {
    let bootstrap = match next {
        Some((sn, an)) => table.get(sn, an)?,
        None => 0.0,
    };
    apply_td(table, s, a, r, bootstrap, cfg)
}

fn apply_td(table: &mut QTable, s: usize, a: usize, r: f64, bootstrap: f64, cfg: &TdConfig) -> Result<f64> {
    let q = table.get(s, a)?;
    let updated = q + cfg.alpha * td_error(r, cfg.gamma, bootstrap, q);
    table.set(s, a, updated)?;
    Ok(updated)
}

/// The printed decay map `log10((e^eps + 1) / 25)`, without clamping.
pub fn epsilon_decay_raw(eps: f64) -> f64 {
    libm::log10((libm::exp(eps) + 1.0) / 25.0)
}

/// One per-episode decay step, clamped from below at `eps_min`.
pub fn epsilon_step(eps: f64, eps_min: f64) -> f64 {
    epsilon_decay_raw(eps).max(eps_min)
}

/// Random action with probability `eps`, otherwise greedy. Always consumes
/// one uniform draw, plus one index draw when exploring.
pub fn select_epsilon_greedy(table: &QTable, s: usize, eps: f64, rng: &mut SeededRng) -> Result<usize> {
    if rng.uniform() < eps {
        table.check(s, 0)?;
        Ok(rng.below(table.n_actions))
    } else {
        table.argmax(s)
    }
}

/// Trains a Q-table on `env` through the bucketing in `spec`.
///
/// Both algorithms share one loop: the next action is chosen before the
/// current transition is applied, so with `gamma = 0` the two produce
/// identical trajectories and tables.
pub fn train_tabular<E: Environment + ?Sized>(
    env: &mut E,
    algo: TdAlgorithm,
    spec: &RangeSpec,
    cfg: &TdConfig,
    rng: &mut SeededRng,
) -> Result<(QTable, Vec<EpisodeLog>)> {
    cfg.validate()?;
    let action_space = env.spec().action_space.clone();
    Error::check_dim(env.spec().obs_dim(), spec.dim())?;
    let k_act = cfg.action_buckets;
    let act_dim = action_space.dim();
    let n_actions = joint_action_count(act_dim, k_act, cfg.action_table_cap)?;
    let state_dims = spec.dim().min(cfg.state_dim_cap);
    let n_states = spec.state_count(state_dims)?;
    match n_states.checked_mul(n_actions) {
        Some(c) if c <= cfg.table_cell_cap => {}
        _ => {
            return Err(Error::Capacity(format!(
                "{n_states} states x {n_actions} actions exceeds the table cap of {}",
                cfg.table_cell_cap
            )))
        }
    }
    let mut table = QTable::new(n_states, n_actions, cfg.init_value)?;
    // Decoded continuous action for every flat action index.
    let actions: Vec<Vec<f64>> = (0..n_actions)
        .map(|a| decode_action(&action_space, k_act, &unflatten(a, k_act, act_dim)))
        .collect::<Result<_>>()?;

    let mut logs = Vec::with_capacity(cfg.episodes);
    let mut eps = cfg.epsilon0;
    for _ in 0..cfg.episodes {
        let obs = env.reset(rng.next_u64())?;
        let mut s = encode_prefix(spec, &obs, state_dims)?.1;
        let mut a = select_epsilon_greedy(&table, s, eps, rng)?;
        let mut episode_return = 0.0;
        let mut steps = 0;
        for _ in 0..cfg.steps_per_episode {
            let step = env.step(&actions[a])?;
            episode_return += step.reward;
            steps += 1;
            let s_next = encode_prefix(spec, &step.observation, state_dims)?.1;
            let a_next = select_epsilon_greedy(&table, s_next, eps, rng)?;
            let terminal = step.terminated();
            match algo {
                TdAlgorithm::QLearning => {
                    q_update(&mut table, s, a, step.reward, (!terminal).then_some(s_next), cfg)?;
                }
                TdAlgorithm::Sarsa => {
                    sarsa_update(&mut table, s, a, step.reward, (!terminal).then_some((s_next, a_next)), cfg)?;
                }
            }
            if step.done {
                break;
            }
            s = s_next;
            a = a_next;
        }
        logs.push(EpisodeLog {
            episode_return,
            exploration: eps,
            steps,
        });
        eps = epsilon_step(eps, cfg.epsilon_min);
    }
    Ok((table, logs))
}
