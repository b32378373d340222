//! One-dimensional "move to the origin" task used to check that DDPG learns.
//!
//! `s' = s + step_size * a`, reward `-(s')^2 - ctrl_weight * a^2`, actions in
//! `[-1, 1]`. Each episode starts at `+start_distance` or `-start_distance`
//! with equal probability, so a random policy's return spread is dominated by
//! its own actions rather than by the start state.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{ensure_finite, EnvSpec, Environment, EpisodeClock};
use crate::error::Result;
use crate::rng::SeededRng;
use crate::spaces::{BoxSpace, StepResult};

#[derive(Debug, Clone)]
pub struct MoveToOrigin {
    spec: EnvSpec,
    pub step_size: f64,
    pub ctrl_weight: f64,
    pub start_distance: f64,
    position: f64,
    clock: EpisodeClock,
}

impl MoveToOrigin {
    pub fn new(max_steps: usize) -> Result<Self> {
        Ok(Self {
            spec: EnvSpec::new(BoxSpace::unbounded(1)?, BoxSpace::uniform(1, -1.0, 1.0)?, max_steps, 1.0)?,
            step_size: 0.1,
            ctrl_weight: 0.01,
            start_distance: 3.0,
            position: 0.0,
            clock: EpisodeClock::default(),
        })
    }

    pub fn position(&self) -> f64 {
        self.position
    }
}

impl Default for MoveToOrigin {
    fn default() -> Self {
        Self::new(50).expect("valid default spec")
    }
}

impl Environment for MoveToOrigin {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        let mut rng = SeededRng::new(seed);
        let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
        self.position = sign * self.start_distance;
        self.clock.start();
        Ok(vec![self.position])
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let a = self.spec.action_space.clip(action)?[0];
        self.clock.begin_step()?;
        self.position += self.step_size * a;
        if let Err(e) = ensure_finite(&[self.position], "move-to-origin") {
            self.clock.abort();
            return Err(e);
        }
        let state_cost = self.position * self.position;
        let ctrl = self.ctrl_weight * a * a;
        let (done, truncated) = self.clock.finish_step(false, self.spec.max_steps);
        let mut info = BTreeMap::new();
        info.insert("state_cost", state_cost);
        info.insert(crate::rewards::CTRL_COST, ctrl);
        Ok(StepResult {
            observation: vec![self.position],
            reward: -state_cost - ctrl,
            done,
            truncated,
            info,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_fixed_distance_and_moves() {
        let mut env = MoveToOrigin::default();
        let obs = env.reset(4).unwrap();
        assert_eq!(obs[0].abs(), 3.0);
        let r = env.step(&[-obs[0].signum()]).unwrap();
        assert!((r.observation[0].abs() - 2.9).abs() < 1e-12);
        assert!((r.reward - (-(2.9f64 * 2.9) - 0.01)).abs() < 1e-12);
    }

    #[test]
    fn episode_length_is_capped() {
        let mut env = MoveToOrigin::default();
        env.reset(0).unwrap();
        for i in 0..50 {
            let r = env.step(&[0.0]).unwrap();
            assert_eq!(r.done, i == 49);
        }
        assert!(env.step(&[0.0]).is_err());
    }
}
