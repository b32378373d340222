//! The environment contract and the built-in simulators.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::spaces::{BoxSpace, StepResult};

pub mod chain;
pub mod idp;
pub mod reacher;
pub mod toy;

pub use chain::ChainWalk;
pub use idp::{DoublePendulumCart, IdpParams, IdpState};
pub use reacher::{Reacher, ReacherParams, ReacherState};
pub use toy::MoveToOrigin;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub observation_space: BoxSpace,
    pub action_space: BoxSpace,
    pub max_steps: usize,
    pub dt: f64,
}

impl EnvSpec {
    pub fn new(observation_space: BoxSpace, action_space: BoxSpace, max_steps: usize, dt: f64) -> Result<Self> {
        if !action_space.is_bounded() {
            return Err(Error::UnsupportedSpace("action space bounds must be finite".into()));
        }
        if max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be at least 1".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            observation_space,
            action_space,
            max_steps,
            dt,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.observation_space.dim()
    }

    pub fn act_dim(&self) -> usize {
        self.action_space.dim()
    }
}

/// Episodic environment with continuous observations and actions.
///
/// `step` clips the action into the action space before applying it. Once a
/// step reports `done`, further steps fail with [`Error::Protocol`] until the
/// next `reset`.
pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>>;

    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
}

impl<E: Environment + ?Sized> Environment for alloc::boxed::Box<E> {
    fn spec(&self) -> &EnvSpec {
        (**self).spec()
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        (**self).reset(seed)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        (**self).step(action)
    }
}

/// Step counter and sticky done flag shared by the built-in environments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EpisodeClock {
    steps: usize,
    active: bool,
}

impl EpisodeClock {
    pub fn start(&mut self) {
        self.steps = 0;
        self.active = true;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    /// Validates that a step may be taken and counts it.
    pub fn begin_step(&mut self) -> Result<()> {
        if !self.active {
            return Err(Error::Protocol(
                "step called without an active episode (reset first)".into(),
            ));
        }
        self.steps += 1;
        Ok(())
    }

    /// Records the outcome of the current step, returning `(done, truncated)`.
    pub fn finish_step(&mut self, terminated: bool, max_steps: usize) -> (bool, bool) {
        let out_of_time = self.steps >= max_steps;
        let done = terminated || out_of_time;
        if done {
            self.active = false;
        }
        (done, done && !terminated)
    }

    pub fn abort(&mut self) {
        self.active = false;
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use core::f64::consts::{PI, TAU};
    if a > -PI && a <= PI {
        return a;
    }
    let mut r = (a + PI) % TAU;
    if r <= 0.0 {
        r += TAU;
    }
    r - PI
}

/// One classical fourth-order Runge-Kutta step of `y' = f(y)`.
pub(crate) fn rk4_step<const N: usize>(y: [f64; N], h: f64, f: impl Fn(&[f64; N]) -> [f64; N]) -> [f64; N] {
    let axpy = |a: &[f64; N], k: &[f64; N], s: f64| -> [f64; N] { core::array::from_fn(|i| a[i] + s * k[i]) };
    let k1 = f(&y);
    let k2 = f(&axpy(&y, &k1, 0.5 * h));
    let k3 = f(&axpy(&y, &k2, 0.5 * h));
    let k4 = f(&axpy(&y, &k3, h));
    core::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalDivergence(format!("{what}: non-finite state after step")))
    }
}
