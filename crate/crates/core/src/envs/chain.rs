//! Deterministic chain walk with a rewarding terminal state at the right end.
//!
//! States `0..n`; the observation is the state index as a float. A
//! negative action moves left (clamped at 0), a non-negative action moves
//! right. Entering state `n - 1` pays 1 and terminates. Episodes start in a
//! uniformly chosen non-terminal state.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{EnvSpec, Environment, EpisodeClock};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::spaces::{BoxSpace, StepResult};

#[derive(Debug, Clone)]
pub struct ChainWalk {
    spec: EnvSpec,
    n_states: usize,
    state: usize,
    clock: EpisodeClock,
}

impl ChainWalk {
    pub fn new(n_states: usize, max_steps: usize) -> Result<Self> {
        if n_states < 2 {
            return Err(Error::InvalidInput("chain needs at least two states".into()));
        }
        Ok(Self {
            spec: EnvSpec::new(
                BoxSpace::uniform(1, 0.0, (n_states - 1) as f64)?,
                BoxSpace::uniform(1, -1.0, 1.0)?,
                max_steps,
                1.0,
            )?,
            n_states,
            state: 0,
            clock: EpisodeClock::default(),
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Successor state and reward for a discrete move, independent of any episode.
    pub fn transition(&self, state: usize, right: bool) -> (usize, f64, bool) {
        let next = if right {
            (state + 1).min(self.n_states - 1)
        } else {
            state.saturating_sub(1)
        };
        let terminal = next == self.n_states - 1;
        (next, if terminal { 1.0 } else { 0.0 }, terminal)
    }
}

impl Environment for ChainWalk {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        let mut rng = SeededRng::new(seed);
        self.state = rng.below(self.n_states - 1);
        self.clock.start();
        Ok(vec![self.state as f64])
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let a = self.spec.action_space.clip(action)?[0];
        self.clock.begin_step()?;
        let (next, reward, terminal) = self.transition(self.state, a >= 0.0);
        self.state = next;
        let (done, truncated) = self.clock.finish_step(terminal, self.spec.max_steps);
        Ok(StepResult {
            observation: vec![next as f64],
            reward,
            done,
            truncated,
            info: BTreeMap::new(),
        })
    }
}
