//! Deep deterministic policy gradient: actor, critic, their target copies,
//! Ornstein-Uhlenbeck exploration and a FIFO replay buffer.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::mlp::{adam_step, mse_loss, stack, Activation, AdamState, Gradients, LayerSpec, MlpNet, Mode};
use crate::rng::SeededRng;
use crate::spaces::{BoxSpace, EpisodeLog, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuParams {
    pub beta: f64,
    pub mu: f64,
    pub sigma: f64,
    /// Use `N + beta (mu - N) + sigma z` instead of `(1 - beta) N - mu + sigma z`.
    pub standard_form: bool,
}

impl Default for OuParams {
    fn default() -> Self {
        Self {
            beta: 0.15,
            mu: 0.0,
            sigma: 0.3,
            standard_form: false,
        }
    }
}

impl OuParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidInput(format!("ou beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.sigma >= 0.0) || !self.mu.is_finite() || !self.sigma.is_finite() {
            return Err(Error::InvalidInput("ou sigma must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Stationary variance of the unit-step AR(1) recurrence.
    pub fn stationary_variance(&self) -> f64 {
        self.sigma * self.sigma / (self.beta * (2.0 - self.beta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuNoise {
    pub params: OuParams,
    pub state: Vec<f64>,
}

impl OuNoise {
    pub fn new(dim: usize, params: OuParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            state: vec![0.0; dim],
        })
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|n| *n = 0.0);
    }

    pub fn step(&mut self, rng: &mut SeededRng) -> &[f64] {
        let OuParams { beta, mu, sigma, standard_form } = self.params;
        for n in &mut self.state {
            let z = rng.normal();
            *n = if standard_form {
                *n + beta * (mu - *n) + sigma * z
            } else {
                (1.0 - beta) * *n - mu + sigma * z
            };
        }
        &self.state
    }
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidInput("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// `n` uniform draws with replacement.
    pub fn sample(&self, n: usize, rng: &mut SeededRng) -> Result<Vec<Transition>> {
        if n == 0 {
            return Err(Error::InvalidInput("sample size must be positive".into()));
        }
        if self.items.len() < n {
            return Err(Error::InsufficientData {
                needed: n,
                available: self.items.len(),
            });
        }
        Ok((0..n).map(|_| self.items[rng.below(self.items.len())].clone()).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpgConfig {
    pub gamma: f64,
    /// Weight of the live network in each soft update.
    pub tau: f64,
    pub batch_n: usize,
    pub actor_batch: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub warmup_steps: usize,
    pub capacity: usize,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub mask_terminal: bool,
    pub ou: OuParams,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.4,
            tau: 0.99,
            batch_n: 100,
            actor_batch: 1,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            warmup_steps: 100,
            capacity: 10_000,
            episodes: 500,
            steps_per_episode: 1000,
            mask_terminal: true,
            ou: OuParams::default(),
        }
    }
}

impl DdpgConfig {
    pub const TAU_CONVENTIONAL: f64 = 0.001;

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidInput(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidInput(format!("tau must lie in [0, 1], got {}", self.tau)));
        }
        if self.batch_n == 0 || self.actor_batch == 0 {
            return Err(Error::InvalidInput("batch sizes must be positive".into()));
        }
        if self.batch_n > self.capacity || self.actor_batch > self.capacity {
            return Err(Error::InvalidInput("batch size exceeds replay capacity".into()));
        }
        for (name, lr) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {lr}")));
            }
        }
        self.ou.validate()
    }
}

/// Layer layouts of the actor (`obs -> act`) and critic (`obs ++ act -> 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub actor: Vec<LayerSpec>,
    pub critic: Vec<LayerSpec>,
}

impl Architecture {
    /// Both networks share hidden sizes; the actor ends in tanh, the critic is linear.
    pub fn from_hidden(obs_dim: usize, act_dim: usize, hidden: &[usize], hidden_activation: Activation, dropout_p: f64) -> Self {
        Self {
            actor: stack(obs_dim, hidden, act_dim, hidden_activation, Activation::Tanh, dropout_p),
            critic: stack(obs_dim + act_dim, hidden, 1, hidden_activation, Activation::Linear, dropout_p),
        }
    }

    pub fn validate(&self, obs_dim: usize, act_dim: usize) -> Result<()> {
        let ends = |specs: &[LayerSpec]| specs.first().map(|s| s.in_dim).zip(specs.last().map(|s| s.out_dim));
        if ends(&self.actor) != Some((obs_dim, act_dim)) {
            return Err(Error::InvalidInput(format!("actor must map {obs_dim} inputs to {act_dim} outputs")));
        }
        if ends(&self.critic) != Some((obs_dim + act_dim, 1)) {
            return Err(Error::InvalidInput(format!("critic must map {} inputs to 1 output", obs_dim + act_dim)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: MlpNet,
    pub critic: MlpNet,
    pub target_actor: MlpNet,
    pub target_critic: MlpNet,
    pub ou: OuNoise,
    pub buffer: ReplayBuffer,
    pub cfg: DdpgConfig,
    pub actor_adam: AdamState,
    pub critic_adam: AdamState,
    pub action_space: BoxSpace,
}

fn concat(s: &[f64], a: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(s.len() + a.len());
    x.extend_from_slice(s);
    x.extend_from_slice(a);
    x
}

impl DdpgAgent {
    pub fn new(obs_dim: usize, action_space: BoxSpace, arch: &Architecture, cfg: DdpgConfig, rng: &mut SeededRng) -> Result<Self> {
        cfg.validate()?;
        let act_dim = action_space.dim();
        arch.validate(obs_dim, act_dim)?;
        if !action_space.is_bounded() {
            return Err(Error::UnsupportedSpace("ddpg needs a bounded action space".into()));
        }
        let actor = MlpNet::new(&arch.actor, rng)?;
        let critic = MlpNet::new(&arch.critic, rng)?;
        Self::from_networks(actor, critic, action_space, cfg)
    }

    /// Wraps existing live networks; the targets start as exact copies.
    pub fn from_networks(actor: MlpNet, critic: MlpNet, action_space: BoxSpace, cfg: DdpgConfig) -> Result<Self> {
        cfg.validate()?;
        let obs_dim = actor.input_dim();
        Architecture {
            actor: actor.specs(),
            critic: critic.specs(),
        }
        .validate(obs_dim, action_space.dim())?;
        let mut target_actor = actor.clone();
        let mut target_critic = critic.clone();
        target_actor.set_mode(Mode::Eval);
        target_critic.set_mode(Mode::Eval);
        Ok(Self {
            actor_adam: AdamState::for_net(&actor, cfg.actor_lr),
            critic_adam: AdamState::for_net(&critic, cfg.critic_lr),
            ou: OuNoise::new(action_space.dim(), cfg.ou)?,
            buffer: ReplayBuffer::new(cfg.capacity)?,
            actor,
            critic,
            target_actor,
            target_critic,
            cfg,
            action_space,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.action_space.dim()
    }

    /// Deterministic policy output, plus OU noise when exploring, clipped to the action space.
    pub fn act(&mut self, obs: &[f64], explore: bool, rng: &mut SeededRng) -> Result<Vec<f64>> {
        let mut a = self.actor.predict(obs)?;
        if explore {
            let noise = self.ou.step(rng);
            a.iter_mut().zip(noise).for_each(|(x, n)| *x += n);
        }
        self.action_space.clip(&a)
    }

    pub fn critic_targets(&self, batch: &[Transition]) -> Result<Vec<f64>> {
        critic_targets(batch, &self.target_actor, &self.target_critic, self.cfg.gamma, self.cfg.mask_terminal)
    }

    /// One Adam step of the critic towards the target values; returns the pre-step loss.
    pub fn critic_update(&mut self, batch: &[Transition], rng: &mut SeededRng) -> Result<f64> {
        let y = self.critic_targets(batch)?;
        let mut q = Vec::with_capacity(batch.len());
        let mut caches = Vec::with_capacity(batch.len());
        for t in batch {
            let (out, cache) = self.critic.forward(&concat(&t.state, &t.action), rng)?;
            q.push(out[0]);
            caches.push(cache);
        }
        let (loss, grad) = mse_loss(&q, &y)?;
        if !loss.is_finite() {
            return Err(Error::NumericalDivergence(format!("critic loss became {loss}")));
        }
        let mut total = Gradients::zeros_like(&self.critic);
        for (cache, g) in caches.iter().zip(&grad) {
            total.accumulate(&self.critic.backward(cache, &[*g])?)?;
        }
        adam_step(&mut self.critic, &total, &mut self.critic_adam)?;
        Ok(loss)
    }

    /// One Adam ascent step of the actor along the critic's action gradient;
    /// returns the mean critic value before the step.
    pub fn actor_update(&mut self, batch: &[Transition], rng: &mut SeededRng) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("actor batch is empty".into()));
        }
        let obs_dim = self.obs_dim();
        let m = batch.len() as f64;
        let mut total = Gradients::zeros_like(&self.actor);
        let mut q_sum = 0.0;
        for t in batch {
            let (a, actor_cache) = self.actor.forward(&t.state, rng)?;
            let (q, critic_cache) = self.critic.forward_eval(&concat(&t.state, &a))?;
            q_sum += q[0];
            let dq = self.critic.backward(&critic_cache, &[1.0])?;
            let upstream: Vec<f64> = dq.input[obs_dim..].iter().map(|g| -g / m).collect();
            total.accumulate(&self.actor.backward(&actor_cache, &upstream)?)?;
        }
        let mean_q = q_sum / m;
        if !mean_q.is_finite() {
            return Err(Error::NumericalDivergence(format!("actor objective became {mean_q}")));
        }
        adam_step(&mut self.actor, &total, &mut self.actor_adam)?;
        Ok(mean_q)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        soft_update(&self.actor, &mut self.target_actor, self.cfg.tau)?;
        soft_update(&self.critic, &mut self.target_critic, self.cfg.tau)
    }
}

/// `y_i = r_i + gamma Q'(s'_i, mu'(s'_i))`, with the bootstrap dropped on
/// terminal transitions when `mask_terminal` is set.
pub fn critic_targets(
    batch: &[Transition],
    target_actor: &MlpNet,
    target_critic: &MlpNet,
    gamma: f64,
    mask_terminal: bool,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("batch is empty".into()));
    }
    batch
        .iter()
        .map(|t| {
            if mask_terminal && t.done {
                return Ok(t.reward);
            }
            let a = target_actor.predict(&t.next_state)?;
            let q = target_critic.predict(&concat(&t.next_state, &a))?;
            Ok(t.reward + gamma * q[0])
        })
        .collect()
}

/// `target <- tau live + (1 - tau) target`, parameter by parameter.
pub fn soft_update(live: &MlpNet, target: &mut MlpNet, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidInput(format!("tau must lie in [0, 1], got {tau}")));
    }
    target.zip_params_mut(live, |t, l| *t = tau * l + (1.0 - tau) * *t)
}

/// Runs DDPG on `env`; every step acts with noise, stores the transition and,
/// once the buffer is warm, updates the critic, the actor and both targets.
pub fn ddpg_train<E: Environment + ?Sized>(
    env: &mut E,
    cfg: &DdpgConfig,
    arch: &Architecture,
    rng: &mut SeededRng,
) -> Result<(DdpgAgent, Vec<EpisodeLog>)> {
    let spec = env.spec().clone();
    let mut agent = DdpgAgent::new(spec.obs_dim(), spec.action_space.clone(), arch, cfg.clone(), rng)?;
    let logs = ddpg_continue(env, &mut agent, cfg.episodes, rng)?;
    Ok((agent, logs))
}

/// Trains an existing agent for `episodes` more episodes.
pub fn ddpg_continue<E: Environment + ?Sized>(
    env: &mut E,
    agent: &mut DdpgAgent,
    episodes: usize,
    rng: &mut SeededRng,
) -> Result<Vec<EpisodeLog>> {
    Error::check_dim(agent.obs_dim(), env.spec().obs_dim())?;
    Error::check_dim(agent.act_dim(), env.spec().act_dim())?;
    let warm = agent.cfg.batch_n.max(agent.cfg.warmup_steps);
    let mut logs = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset(rng.next_u64())?;
        agent.ou.reset();
        let mut ret = 0.0;
        let mut steps = 0;
        while steps < agent.cfg.steps_per_episode {
            let action = agent.act(&obs, true, rng)?;
            let res = env.step(&action)?;
            ret += res.reward;
            steps += 1;
            let terminated = res.terminated();
            let done = res.done;
            agent.buffer.push(Transition {
                state: core::mem::replace(&mut obs, res.observation),
                action,
                reward: res.reward,
                next_state: obs.clone(),
                done: terminated,
            });
            if agent.buffer.len() >= warm {
                let batch = agent.buffer.sample(agent.cfg.batch_n, rng)?;
                agent.critic_update(&batch, rng)?;
                let batch = agent.buffer.sample(agent.cfg.actor_batch, rng)?;
                agent.actor_update(&batch, rng)?;
                agent.soft_update_targets()?;
            }
            if done {
                break;
            }
        }
        logs.push(EpisodeLog {
            episode_return: ret,
            exploration: agent.cfg.ou.sigma,
            steps,
        });
    }
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::MoveToOrigin;
    use proptest::prelude::*;
    use std::collections::hash_map::DefaultHasher;
    use std::hash::{Hash, Hasher};

    fn digest(net: &MlpNet) -> u64 {
        let mut h = DefaultHasher::new();
        net.params().iter().for_each(|p| p.to_bits().hash(&mut h));
        h.finish()
    }

    fn tr(s: f64, a: f64, r: f64, s2: f64, done: bool) -> Transition {
        Transition {
            state: vec![s],
            action: vec![a],
            reward: r,
            next_state: vec![s2],
            done,
        }
    }

    fn small_agent(cfg: DdpgConfig, seed: u64) -> DdpgAgent {
        let arch = Architecture::from_hidden(1, 1, &[8], Activation::Tanh, 0.0);
        DdpgAgent::new(1, BoxSpace::uniform(1, -1.0, 1.0).unwrap(), &arch, cfg, &mut SeededRng::new(seed)).unwrap()
    }

    #[test]
    fn ou_printed_recurrence_without_noise() {
        let p = OuParams { sigma: 0.0, ..OuParams::default() };
        let mut ou = OuNoise::new(1, p).unwrap();
        ou.state[0] = 1.0;
        let mut rng = SeededRng::new(0);
        assert_eq!(ou.step(&mut rng)[0], 0.85);
        let mut prev = 0.85f64;
        for k in 2..50 {
            let n = ou.step(&mut rng)[0];
            assert!(n.abs() < prev.abs());
            assert!((n - libm::pow(0.85, k as f64)).abs() < 1e-14);
            prev = n;
        }
    }

    #[test]
    fn ou_forms_differ_only_through_mu() {
        let mut rng_a = SeededRng::new(5);
        let mut rng_b = SeededRng::new(5);
        let mut a = OuNoise::new(2, OuParams::default()).unwrap();
        let mut b = OuNoise::new(2, OuParams { standard_form: true, ..OuParams::default() }).unwrap();
        for _ in 0..100 {
            let (x, y) = (a.step(&mut rng_a).to_vec(), b.step(&mut rng_b));
            assert!(x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-12));
        }
        let p = OuParams { mu: 0.5, sigma: 0.0, standard_form: true, ..OuParams::default() };
        let mut c = OuNoise::new(1, p).unwrap();
        for _ in 0..500 {
            c.step(&mut rng_a);
        }
        assert!((c.state[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ou_rejects_bad_params() {
        assert!(OuParams { beta: 1.0, ..OuParams::default() }.validate().is_err());
        assert!(OuParams { sigma: -0.1, ..OuParams::default() }.validate().is_err());
    }

    #[test]
    fn buffer_fifo_eviction() {
        let mut b = ReplayBuffer::new(3).unwrap();
        b.push(tr(0.0, 0.0, 0.0, 0.0, false));
        assert_eq!(b.len(), 1);
        for i in 1..4 {
            b.push(tr(i as f64, 0.0, 0.0, 0.0, false));
        }
        assert_eq!(b.len(), 3);
        let states: Vec<f64> = b.iter().map(|t| t.state[0]).collect();
        assert_eq!(states, vec![1.0, 2.0, 3.0]);
        let mut rng = SeededRng::new(1);
        assert!(b.sample(1000, &mut rng).is_err());
        assert!(b.sample(3, &mut rng).unwrap().iter().all(|t| t.state[0] != 0.0));
    }

    #[test]
    fn buffer_default_capacity() {
        let mut b = ReplayBuffer::new(10_000).unwrap();
        for i in 0..10_000 {
            b.push(tr(i as f64, 0.0, 0.0, 0.0, false));
        }
        assert_eq!(b.len(), 10_000);
    }

    #[test]
    fn buffer_sampling_edge_cases() {
        let mut b = ReplayBuffer::new(4).unwrap();
        let mut rng = SeededRng::new(2);
        assert!(matches!(b.sample(1, &mut rng), Err(Error::InsufficientData { needed: 1, available: 0 })));
        let t = tr(1.0, 0.5, -1.0, 2.0, true);
        b.push(t.clone());
        assert_eq!(b.sample(1, &mut rng).unwrap(), vec![t]);
    }

    #[test]
    fn buffer_sampling_is_uniform() {
        let mut b = ReplayBuffer::new(10).unwrap();
        for i in 0..10 {
            b.push(tr(i as f64, 0.0, 0.0, 0.0, false));
        }
        let mut rng = SeededRng::new(3);
        let n = 100_000;
        let mut counts = [0usize; 10];
        for _ in 0..n / 10 {
            for t in b.sample(10, &mut rng).unwrap() {
                counts[t.state[0] as usize] += 1;
            }
        }
        let sigma = libm::sqrt(n as f64 * 0.1 * 0.9);
        for c in counts {
            assert!((c as f64 - 0.1 * n as f64).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn targets_match_hand_arithmetic() {
        // mu'(s) = tanh(0.5 s + 0.1), Q'(s, a) = 2 s - 3 a + 0.25
        let ta = MlpNet::from_params(&[LayerSpec::new(1, 1, Activation::Tanh)], &[0.5, 0.1]).unwrap();
        let tc = MlpNet::from_params(&[LayerSpec::new(2, 1, Activation::Linear)], &[2.0, -3.0, 0.25]).unwrap();
        let batch = [tr(0.0, 0.0, 1.5, 0.8, false), tr(0.0, 0.0, -2.0, -1.2, true)];
        let y = critic_targets(&batch, &ta, &tc, 0.4, true).unwrap();
        let a = libm::tanh(0.5 * 0.8 + 0.1);
        assert!((y[0] - (1.5 + 0.4 * (1.6 - 3.0 * a + 0.25))).abs() < 1e-12);
        assert_eq!(y[1], -2.0);
        let unmasked = critic_targets(&batch, &ta, &tc, 0.4, false).unwrap();
        let a = libm::tanh(0.5 * -1.2 + 0.1);
        assert!((unmasked[1] - (-2.0 + 0.4 * (-2.4 - 3.0 * a + 0.25))).abs() < 1e-12);
        let zero = critic_targets(&batch, &ta, &tc, 0.0, false).unwrap();
        assert_eq!(zero, vec![1.5, -2.0]);
        let zc = MlpNet::from_params(&[LayerSpec::new(2, 1, Activation::Linear)], &[0.0; 3]).unwrap();
        assert_eq!(critic_targets(&batch, &ta, &zc, 0.9, false).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn targets_equal_live_at_construction() {
        let agent = small_agent(DdpgConfig::default(), 4);
        assert_eq!(digest(&agent.actor), digest(&agent.target_actor));
        assert_eq!(digest(&agent.critic), digest(&agent.target_critic));
    }

    #[test]
    fn act_contracts() {
        let actor = MlpNet::from_params(&[LayerSpec::new(1, 1, Activation::Tanh)], &[0.0, 0.0]).unwrap();
        let critic = MlpNet::from_params(&[LayerSpec::new(2, 1, Activation::Linear)], &[0.0; 3]).unwrap();
        let space = BoxSpace::uniform(1, -1.0, 1.0).unwrap();
        let cfg = DdpgConfig { ou: OuParams { sigma: 0.0, ..OuParams::default() }, ..DdpgConfig::default() };
        let mut agent = DdpgAgent::from_networks(actor, critic, space, cfg).unwrap();
        let mut rng = SeededRng::new(0);
        assert_eq!(agent.act(&[3.0], false, &mut rng).unwrap(), vec![0.0]);
        assert_eq!(agent.act(&[3.0], true, &mut rng).unwrap(), vec![0.0]);
        assert!(agent.act(&[1.0, 2.0], false, &mut rng).is_err());

        let mut agent = small_agent(DdpgConfig { ou: OuParams { sigma: 5.0, ..OuParams::default() }, ..DdpgConfig::default() }, 1);
        for i in 0..200 {
            let a = agent.act(&[i as f64 - 100.0], true, &mut rng).unwrap();
            assert!((-1.0..=1.0).contains(&a[0]));
            let pure = agent.act(&[0.3], false, &mut rng).unwrap();
            assert_eq!(pure, agent.act(&[0.3], false, &mut SeededRng::new(i)).unwrap());
        }
    }

    #[test]
    fn critic_update_touches_only_the_critic() {
        let mut agent = small_agent(DdpgConfig::default(), 6);
        let batch: Vec<_> = (0..100).map(|i| tr(i as f64 / 50.0 - 1.0, 0.3, -1.0, 0.0, false)).collect();
        let before = [digest(&agent.actor), digest(&agent.target_actor), digest(&agent.target_critic)];
        let old = digest(&agent.critic);
        let mut rng = SeededRng::new(0);
        let y = agent.critic_targets(&batch).unwrap();
        let q: Vec<f64> = batch.iter().map(|t| agent.critic.predict(&concat(&t.state, &t.action)).unwrap()[0]).collect();
        let loss = agent.critic_update(&batch, &mut rng).unwrap();
        assert!((loss - mse_loss(&q, &y).unwrap().0).abs() < 1e-12);
        assert_eq!(before, [digest(&agent.actor), digest(&agent.target_actor), digest(&agent.target_critic)]);
        assert_ne!(old, digest(&agent.critic));
    }

    #[test]
    fn critic_at_target_is_a_fixed_point() {
        // Q(s, a) = 0 everywhere and all rewards 0 with gamma 0 give y = Q.
        let actor = MlpNet::from_params(&[LayerSpec::new(1, 1, Activation::Tanh)], &[0.7, 0.0]).unwrap();
        let critic = MlpNet::from_params(&[LayerSpec::new(2, 1, Activation::Linear)], &[0.0; 3]).unwrap();
        let cfg = DdpgConfig { gamma: 0.0, batch_n: 2, ..DdpgConfig::default() };
        let mut agent = DdpgAgent::from_networks(actor, critic, BoxSpace::uniform(1, -1.0, 1.0).unwrap(), cfg).unwrap();
        let before = agent.critic.params();
        let loss = agent.critic_update(&[tr(0.5, 0.1, 0.0, 0.2, false), tr(-0.5, 0.9, 0.0, 0.1, false)], &mut SeededRng::new(0)).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(before, agent.critic.params());
    }

    #[test]
    fn critic_loss_decreases_on_fixed_batch() {
        let cfg = DdpgConfig { gamma: 0.0, critic_lr: 1e-3, ..DdpgConfig::default() };
        let mut agent = small_agent(cfg, 7);
        let batch: Vec<_> = (0..100).map(|i| {
            let s = i as f64 / 50.0 - 1.0;
            tr(s, -s, -s * s, s, false)
        }).collect();
        let mut rng = SeededRng::new(1);
        let mut prev = f64::INFINITY;
        for _ in 0..100 {
            let loss = agent.critic_update(&batch, &mut rng).unwrap();
            assert!(loss <= prev + 1e-12, "{loss} > {prev}");
            prev = loss;
        }
    }

    #[test]
    fn actor_update_touches_only_the_actor() {
        let mut agent = small_agent(DdpgConfig::default(), 8);
        let before = [digest(&agent.critic), digest(&agent.target_actor), digest(&agent.target_critic)];
        let old = digest(&agent.actor);
        agent.actor_update(&[tr(0.4, 0.0, 0.0, 0.0, false)], &mut SeededRng::new(0)).unwrap();
        assert_eq!(before, [digest(&agent.critic), digest(&agent.target_actor), digest(&agent.target_critic)]);
        assert_ne!(old, digest(&agent.actor));
    }

    #[test]
    fn zero_critic_freezes_actor() {
        let actor = MlpNet::new(&[LayerSpec::new(1, 1, Activation::Tanh)], &mut SeededRng::new(0)).unwrap();
        let critic = MlpNet::from_params(&[LayerSpec::new(2, 1, Activation::Linear)], &[0.0; 3]).unwrap();
        let mut agent = DdpgAgent::from_networks(actor, critic, BoxSpace::uniform(1, -1.0, 1.0).unwrap(), DdpgConfig::default()).unwrap();
        let before = agent.actor.params();
        agent.actor_update(&[tr(0.4, 0.0, 0.0, 0.0, false)], &mut SeededRng::new(0)).unwrap();
        assert_eq!(before, agent.actor.params());
    }

    /// Piecewise-linear relu interpolation of `Q(s, a) = -(a - 1)^2` on knots
    /// spaced 0.25 apart over [-2, 2].
    fn quadratic_critic() -> MlpNet {
        let q = |a: f64| -(a - 1.0) * (a - 1.0);
        let knots: Vec<f64> = (0..16).map(|k| -2.0 + 0.25 * k as f64).collect();
        let slope = |k: usize| (q(knots[k] + 0.25) - q(knots[k])) / 0.25;
        let mut hidden: Vec<f64> = knots.iter().flat_map(|_| [0.0, 1.0]).collect();
        hidden.extend(knots.iter().map(|kn| -kn));
        let mut out: Vec<f64> = (0..knots.len())
            .map(|k| if k == 0 { slope(0) } else { slope(k) - slope(k - 1) })
            .collect();
        out.push(q(knots[0]));
        let specs = [LayerSpec::new(2, 16, Activation::Relu), LayerSpec::new(16, 1, Activation::Linear)];
        let params: Vec<f64> = hidden.into_iter().chain(out).collect();
        let net = MlpNet::from_params(&specs, &params).unwrap();
        for a in [-1.5, -0.25, 0.5, 1.0, 1.75] {
            assert!((net.predict(&[0.2, a]).unwrap()[0] - q(a)).abs() < 1e-12);
        }
        net
    }

    #[test]
    fn actor_ascends_towards_critic_maximum() {
        let actor = MlpNet::from_params(&[LayerSpec::new(1, 1, Activation::Tanh)], &[0.1, -0.5]).unwrap();
        let cfg = DdpgConfig { actor_lr: 1e-2, ..DdpgConfig::default() };
        let mut agent = DdpgAgent::from_networks(actor, quadratic_critic(), BoxSpace::uniform(1, -1.0, 1.0).unwrap(), cfg).unwrap();
        let mut rng = SeededRng::new(0);
        let start = agent.actor.predict(&[0.3]).unwrap()[0];
        let mut prev_q = f64::NEG_INFINITY;
        for _ in 0..1000 {
            let q = agent.actor_update(&[tr(0.3, 0.0, 0.0, 0.0, false)], &mut rng).unwrap();
            assert!(q >= prev_q - 1e-9);
            prev_q = q;
        }
        let end = agent.actor.predict(&[0.3]).unwrap()[0];
        assert!(end > start && end > 0.9, "{start} -> {end}");
    }

    #[test]
    fn soft_update_extremes() {
        let a = small_agent(DdpgConfig::default(), 1).actor;
        let mut t = small_agent(DdpgConfig::default(), 2).actor;
        let t0 = t.params();
        soft_update(&a, &mut t, 0.0).unwrap();
        assert_eq!(t.params(), t0);
        soft_update(&a, &mut t, 1.0).unwrap();
        assert_eq!(t.params(), a.params());
        let other = MlpNet::new(&[LayerSpec::new(1, 1, Activation::Tanh)], &mut SeededRng::new(0)).unwrap();
        assert!(soft_update(&other, &mut t, 0.5).is_err());
    }

    #[test]
    fn zero_episodes_give_empty_log() {
        let mut env = MoveToOrigin::default();
        let cfg = DdpgConfig { episodes: 0, ..DdpgConfig::default() };
        let arch = Architecture::from_hidden(1, 1, &[4], Activation::Relu, 0.0);
        let (_, logs) = ddpg_train(&mut env, &cfg, &arch, &mut SeededRng::new(0)).unwrap();
        assert!(logs.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = DdpgConfig { episodes: 6, batch_n: 16, warmup_steps: 16, ..DdpgConfig::default() };
        let arch = Architecture::from_hidden(1, 1, &[8, 4], Activation::Relu, 0.2);
        let run = || {
            let mut env = MoveToOrigin::default();
            let (agent, logs) = ddpg_train(&mut env, &cfg, &arch, &mut SeededRng::new(11)).unwrap();
            (agent.actor.params(), logs)
        };
        let (pa, la) = run();
        let (pb, lb) = run();
        assert_eq!(la, lb);
        assert!(pa.iter().zip(&pb).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(la.len(), 6);
        assert!(la.iter().all(|l| l.steps == 50));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn buffer_never_exceeds_capacity(cap in 1usize..20, pushes in 0usize..100) {
            let mut b = ReplayBuffer::new(cap).unwrap();
            for i in 0..pushes {
                b.push(tr(i as f64, 0.0, 0.0, 0.0, false));
                prop_assert!(b.len() <= cap);
            }
            let oldest_kept = pushes.saturating_sub(cap) as f64;
            prop_assert!(b.iter().all(|t| t.state[0] >= oldest_kept));
            let expect: Vec<f64> = (pushes.saturating_sub(cap)..pushes).map(|i| i as f64).collect();
            prop_assert_eq!(b.iter().map(|t| t.state[0]).collect::<Vec<_>>(), expect);
        }

        #[test]
        fn soft_update_contracts_geometrically(seed in any::<u64>(), tau in 0.001f64..0.5) {
            let live = small_agent(DdpgConfig::default(), seed).critic;
            let mut target = small_agent(DdpgConfig::default(), seed.wrapping_add(1)).critic;
            let dist = |a: &MlpNet, b: &MlpNet| {
                libm::sqrt(a.params().iter().zip(b.params()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            };
            let d0 = dist(&target, &live);
            for _ in 0..5 {
                soft_update(&live, &mut target, tau).unwrap();
            }
            let expect = libm::pow(1.0 - tau, 5.0) * d0;
            prop_assert!((dist(&target, &live) - expect).abs() <= 1e-10 * expect);
        }
    }
}
