//! Per-task reward composers.
//!
//! Each composer returns the scalar reward together with the named terms it
//! was built from. Component keys are fixed strings so CSV logs stay
//! schema-stable. Costs and penalties are stored as positive magnitudes;
//! the Reacher terms are stored already negated, mirroring the task's own
//! naming.

use alloc::collections::BTreeMap;
use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORWARD_REWARD: &str = "forward_reward";
pub const CTRL_COST: &str = "ctrl_cost";
pub const CONTACT_COST: &str = "contact_cost";
pub const HEALTHY_REWARD: &str = "healthy_reward";
pub const DIST_PENALTY: &str = "dist_penalty";
pub const VEL_PENALTY: &str = "vel_penalty";
pub const ALIVE_BONUS: &str = "alive_bonus";
pub const REWARD_DIST: &str = "reward_dist";
pub const REWARD_CTRL: &str = "reward_ctrl";

/// Per-step survival bonus of the double-pendulum task.
pub const IDP_ALIVE_BONUS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub ctrl_cost_weight: f64,
    pub forward_reward_weight: f64,
    pub contact_cost_weight: f64,
    pub healthy_reward: f64,
    pub alive_bonus: f64,
}

impl Default for RewardWeights {
    /// HalfCheetah/Hopper-style weights.
    fn default() -> Self {
        Self {
            ctrl_cost_weight: 0.1,
            forward_reward_weight: 1.0,
            contact_cost_weight: 5e-4,
            healthy_reward: 1.0,
            alive_bonus: IDP_ALIVE_BONUS,
        }
    }
}

impl RewardWeights {
    pub fn swimmer() -> Self {
        Self {
            ctrl_cost_weight: 1e-4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("ctrl_cost_weight", self.ctrl_cost_weight),
            ("forward_reward_weight", self.forward_reward_weight),
            ("contact_cost_weight", self.contact_cost_weight),
            ("healthy_reward", self.healthy_reward),
            ("alive_bonus", self.alive_bonus),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A reward and the named terms it was composed from.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardBreakdown {
    pub reward: f64,
    pub components: BTreeMap<&'static str, f64>,
}

impl RewardBreakdown {
    fn new(reward: f64, terms: &[(&'static str, f64)]) -> Self {
        Self {
            reward,
            components: terms.iter().copied().collect(),
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.components.get(key).copied()
    }
}

fn sum_sq(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum()
}

pub fn ctrl_cost(action: &[f64], weight: f64) -> f64 {
    weight * sum_sq(action)
}

/// `forward_reward_weight * x_velocity - ctrl_cost` (HalfCheetah, Swimmer).
pub fn reward_forward_minus_ctrl(x_velocity: f64, action: &[f64], w: &RewardWeights) -> RewardBreakdown {
    let forward = w.forward_reward_weight * x_velocity;
    let ctrl = ctrl_cost(action, w.ctrl_cost_weight);
    RewardBreakdown::new(forward - ctrl, &[(FORWARD_REWARD, forward), (CTRL_COST, ctrl)])
}

/// Ant (and Humanoid) reward. `contact_forces` must already be clipped to
/// `[-1, 1]`; the contact cost is the weighted squared norm of the forces.
pub fn reward_ant(
    x_velocity: f64,
    action: &[f64],
    contact_forces: &[f64],
    w: &RewardWeights,
) -> RewardBreakdown {
    let forward = x_velocity;
    let healthy = w.healthy_reward;
    let ctrl = ctrl_cost(action, w.ctrl_cost_weight);
    let contact = w.contact_cost_weight * sum_sq(contact_forces);
    RewardBreakdown::new(
        (forward + healthy) - (ctrl + contact),
        &[
            (FORWARD_REWARD, forward),
            (HEALTHY_REWARD, healthy),
            (CTRL_COST, ctrl),
            (CONTACT_COST, contact),
        ],
    )
}

pub fn reward_hopper(
    x_before: f64,
    x_after: f64,
    dt: f64,
    action: &[f64],
    w: &RewardWeights,
) -> Result<RewardBreakdown> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let x_velocity = (x_after - x_before) / dt;
    let forward = w.forward_reward_weight * x_velocity;
    let healthy = w.healthy_reward;
    let ctrl = ctrl_cost(action, w.ctrl_cost_weight);
    Ok(RewardBreakdown::new(
        forward + healthy - ctrl,
        &[(FORWARD_REWARD, forward), (HEALTHY_REWARD, healthy), (CTRL_COST, ctrl)],
    ))
}

/// Double pendulum on a cart: `x` is the horizontal tip position, `y` the tip
/// height, `v1`/`v2` the two hinge angular velocities.
pub fn reward_idp(x: f64, y: f64, v1: f64, v2: f64) -> RewardBreakdown {
    let dist = 0.01 * x * x + (y - 2.0) * (y - 2.0);
    let vel = 1e-3 * v1 * v1 + 5e-3 * v2 * v2;
    RewardBreakdown::new(
        IDP_ALIVE_BONUS - dist - vel,
        &[(ALIVE_BONUS, IDP_ALIVE_BONUS), (DIST_PENALTY, dist), (VEL_PENALTY, vel)],
    )
}

pub fn reward_reacher(fingertip: &[f64; 3], target: &[f64; 3], action: &[f64]) -> RewardBreakdown {
    let d2: f64 = fingertip.iter().zip(target).map(|(f, t)| (f - t) * (f - t)).sum();
    let dist = -libm::sqrt(d2);
    let ctrl = -sum_sq(action);
    RewardBreakdown::new(dist + ctrl, &[(REWARD_DIST, dist), (REWARD_CTRL, ctrl)])
}
