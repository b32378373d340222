//! Planar two-link reacher.
//!
//! Both links are massless rods with point masses at their distal ends (the
//! elbow and the fingertip); the arm moves in a horizontal plane, so gravity
//! does not act. `theta[1]` is the elbow angle relative to the first link.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use super::{ensure_finite, rk4_step, wrap_angle, EnvSpec, Environment, EpisodeClock};
use crate::error::Result;
use crate::rewards::reward_reacher;
use crate::rng::SeededRng;
use crate::spaces::{BoxSpace, StepResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReacherParams {
    pub link_lengths: [f64; 2],
    pub link_masses: [f64; 2],
    pub damping: f64,
    pub gear: f64,
    pub dt: f64,
    pub max_steps: usize,
}

impl Default for ReacherParams {
    fn default() -> Self {
        Self {
            link_lengths: [0.1, 0.1],
            link_masses: [0.05, 0.05],
            damping: 0.01,
            gear: 1.0,
            dt: 0.01,
            max_steps: 50,
        }
    }
}

impl ReacherParams {
    pub fn reach(&self) -> f64 {
        self.link_lengths[0] + self.link_lengths[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReacherState {
    pub theta: [f64; 2],
    pub omega: [f64; 2],
    pub target: [f64; 2],
    pub step_count: usize,
}

pub fn fingertip(s: &ReacherState, p: &ReacherParams) -> [f64; 2] {
    let [l1, l2] = p.link_lengths;
    let a1 = s.theta[0];
    let a12 = s.theta[0] + s.theta[1];
    [
        l1 * libm::cos(a1) + l2 * libm::cos(a12),
        l1 * libm::sin(a1) + l2 * libm::sin(a12),
    ]
}

/// `[cos t1, cos t2, sin t1, sin t2, target_x, target_y, w1, w2, dx, dy, dz]`
/// where `(dx, dy, dz)` is fingertip minus target; `dz` is always 0.
pub fn reacher_observe(s: &ReacherState, p: &ReacherParams) -> Vec<f64> {
    let tip = fingertip(s, p);
    vec![
        libm::cos(s.theta[0]),
        libm::cos(s.theta[1]),
        libm::sin(s.theta[0]),
        libm::sin(s.theta[1]),
        s.target[0],
        s.target[1],
        s.omega[0],
        s.omega[1],
        tip[0] - s.target[0],
        tip[1] - s.target[1],
        0.0,
    ]
}

fn mass_matrix(theta2: f64, p: &ReacherParams) -> [[f64; 2]; 2] {
    let [l1, l2] = p.link_lengths;
    let [m1, m2] = p.link_masses;
    let c2 = libm::cos(theta2);
    let m12 = m2 * l2 * l2 + m2 * l1 * l2 * c2;
    [
        [(m1 + m2) * l1 * l1 + m2 * l2 * l2 + 2.0 * m2 * l1 * l2 * c2, m12],
        [m12, m2 * l2 * l2],
    ]
}

fn accelerations(theta: [f64; 2], omega: [f64; 2], torque: [f64; 2], p: &ReacherParams) -> [f64; 2] {
    let [l1, l2] = p.link_lengths;
    let m2 = p.link_masses[1];
    let h = m2 * l1 * l2 * libm::sin(theta[1]);
    let [w1, w2] = omega;
    let rhs = [
        torque[0] + h * (2.0 * w1 * w2 + w2 * w2) - p.damping * w1,
        torque[1] - h * w1 * w1 - p.damping * w2,
    ];
    let m = mass_matrix(theta[1], p);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det,
        (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
    ]
}

/// Advances the arm by `dt` under joint torques `torque` (already scaled by the gear).
pub fn reacher_dynamics_step(
    s: &ReacherState,
    torque: [f64; 2],
    p: &ReacherParams,
    dt: f64,
) -> Result<ReacherState> {
    let y = [s.theta[0], s.theta[1], s.omega[0], s.omega[1]];
    let [t1, t2, w1, w2] = rk4_step(y, dt, |y| {
        let acc = accelerations([y[0], y[1]], [y[2], y[3]], torque, p);
        [y[2], y[3], acc[0], acc[1]]
    });
    let (theta, omega) = ([t1, t2], [w1, w2]);
    ensure_finite(&[theta[0], theta[1], omega[0], omega[1]], "reacher")?;
    Ok(ReacherState {
        theta: [wrap_angle(theta[0]), wrap_angle(theta[1])],
        omega,
        target: s.target,
        step_count: s.step_count,
    })
}

/// Kinetic energy `0.5 * w^T M(theta) w`.
pub fn reacher_energy(s: &ReacherState, p: &ReacherParams) -> f64 {
    let m = mass_matrix(s.theta[1], p);
    let [w1, w2] = s.omega;
    0.5 * (m[0][0] * w1 * w1 + 2.0 * m[0][1] * w1 * w2 + m[1][1] * w2 * w2)
}

#[derive(Debug, Clone)]
pub struct Reacher {
    params: ReacherParams,
    spec: EnvSpec,
    state: ReacherState,
    clock: EpisodeClock,
}

impl Reacher {
    pub fn new(params: ReacherParams) -> Result<Self> {
        let spec = EnvSpec::new(
            BoxSpace::unbounded(11)?,
            BoxSpace::uniform(2, -1.0, 1.0)?,
            params.max_steps,
            params.dt,
        )?;
        Ok(Self {
            params,
            spec,
            state: ReacherState {
                theta: [0.0; 2],
                omega: [0.0; 2],
                target: [params.reach(), 0.0],
                step_count: 0,
            },
            clock: EpisodeClock::default(),
        })
    }

    pub fn params(&self) -> &ReacherParams {
        &self.params
    }

    pub fn state(&self) -> &ReacherState {
        &self.state
    }

    /// Replaces the simulator state and starts an episode from it.
    pub fn set_state(&mut self, state: ReacherState) -> Vec<f64> {
        self.state = state;
        self.state.step_count = 0;
        self.clock.start();
        reacher_observe(&self.state, &self.params)
    }
}

impl Default for Reacher {
    fn default() -> Self {
        Self::new(ReacherParams::default()).expect("valid default params")
    }
}

impl Environment for Reacher {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        let mut rng = SeededRng::new(seed);
        // (-pi, pi]: negate a draw from [-pi, pi).
        let theta = [-rng.uniform_range(-PI, PI), -rng.uniform_range(-PI, PI)];
        let radius = 0.9 * self.params.reach() * libm::sqrt(rng.uniform());
        let angle = TAU * rng.uniform();
        let target = [radius * libm::cos(angle), radius * libm::sin(angle)];
        Ok(self.set_state(ReacherState {
            theta,
            omega: [0.0; 2],
            target,
            step_count: 0,
        }))
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let a = self.spec.action_space.clip(action)?;
        self.clock.begin_step()?;
        let tip = fingertip(&self.state, &self.params);
        let target = self.state.target;
        let breakdown = reward_reacher(&[tip[0], tip[1], 0.0], &[target[0], target[1], 0.0], &a);
        let torque = [self.params.gear * a[0], self.params.gear * a[1]];
        let next = match reacher_dynamics_step(&self.state, torque, &self.params, self.params.dt) {
            Ok(s) => s,
            Err(e) => {
                self.clock.abort();
                return Err(e);
            }
        };
        self.state = ReacherState {
            step_count: self.clock.steps(),
            ..next
        };
        let (done, truncated) = self.clock.finish_step(false, self.params.max_steps);
        Ok(StepResult {
            observation: reacher_observe(&self.state, &self.params),
            reward: breakdown.reward,
            done,
            truncated,
            info: breakdown.components,
        })
    }
}
