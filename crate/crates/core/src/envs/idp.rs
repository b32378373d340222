//! Double inverted pendulum on a cart.
//!
//! The cart slides on a frictionless rail (optional viscous friction). Each
//! pole is a massless rod with a point mass at its tip; both pole angles are
//! absolute, measured from the upward vertical, so the tip height is
//! `l1 cos(phi1) + l2 cos(phi2)`. Equations of motion come from the
//! Lagrangian in generalized coordinates `(x, phi1, phi2)`.

use alloc::vec;
use alloc::vec::Vec;

use super::{ensure_finite, rk4_step, wrap_angle, EnvSpec, Environment, EpisodeClock};
use crate::error::Result;
use crate::rewards::reward_idp;
use crate::rng::SeededRng;
use crate::spaces::{BoxSpace, StepResult};

const VELOCITY_CLIP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdpParams {
    pub cart_mass: f64,
    pub pole_masses: [f64; 2],
    pub pole_lengths: [f64; 2],
    pub gravity: f64,
    /// Newtons per unit of action.
    pub gear: f64,
    pub cart_friction: f64,
    pub joint_damping: f64,
    pub dt: f64,
    pub max_steps: usize,
    /// Half-width of the uniform initial angle perturbation (rad).
    pub init_noise: f64,
    /// Episode terminates once the tip height drops to this value or below.
    pub fall_height: f64,
}

impl Default for IdpParams {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            pole_masses: [0.1, 0.1],
            pole_lengths: [0.6, 0.6],
            gravity: 9.81,
            gear: 500.0,
            cart_friction: 0.0,
            joint_damping: 0.0,
            dt: 0.005,
            max_steps: 1000,
            init_noise: 0.01,
            fall_height: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdpState {
    pub x: f64,
    pub x_dot: f64,
    pub phi: [f64; 2],
    pub phi_dot: [f64; 2],
    pub step_count: usize,
}

/// `(sin a, cos a)` with the argument reduced about the representable pi, so
/// that a pole stored at `PI` hangs exactly still.
fn sin_cos(a: f64) -> (f64, f64) {
    use core::f64::consts::{FRAC_PI_2, PI};
    let a = wrap_angle(a);
    if a > FRAC_PI_2 {
        let r = PI - a;
        (libm::sin(r), -libm::cos(r))
    } else if a < -FRAC_PI_2 {
        let r = -PI - a;
        (libm::sin(r), -libm::cos(r))
    } else {
        (libm::sin(a), libm::cos(a))
    }
}

pub fn tip_height(s: &IdpState, p: &IdpParams) -> f64 {
    p.pole_lengths[0] * sin_cos(s.phi[0]).1 + p.pole_lengths[1] * sin_cos(s.phi[1]).1
}

pub fn tip_x(s: &IdpState, p: &IdpParams) -> f64 {
    s.x + p.pole_lengths[0] * sin_cos(s.phi[0]).0 + p.pole_lengths[1] * sin_cos(s.phi[1]).0
}

/// `[x, sin phi1, sin phi2, cos phi1, cos phi2, x_dot, phi1_dot, phi2_dot, c1, c2, c3]`.
/// Velocities are clipped to `[-10, 10]`; the constraint-force slots are zero.
pub fn idp_observe(s: &IdpState) -> Vec<f64> {
    let clip = |v: f64| v.clamp(-VELOCITY_CLIP, VELOCITY_CLIP);
    let (s1, c1) = sin_cos(s.phi[0]);
    let (s2, c2) = sin_cos(s.phi[1]);
    vec![
        s.x,
        s1,
        s2,
        c1,
        c2,
        clip(s.x_dot),
        clip(s.phi_dot[0]),
        clip(s.phi_dot[1]),
        0.0,
        0.0,
        0.0,
    ]
}

/// Solves the 3x3 system `m * x = b` by Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap_or(col);
        m.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x
}

fn accelerations(x_dot: f64, phi: [f64; 2], phi_dot: [f64; 2], force: f64, p: &IdpParams) -> [f64; 3] {
    let [m1, m2] = p.pole_masses;
    let [l1, l2] = p.pole_lengths;
    let g = p.gravity;
    let (s1, c1) = sin_cos(phi[0]);
    let (s2, c2) = sin_cos(phi[1]);
    let (s12, c12) = sin_cos(phi[0] - phi[1]);
    let [w1, w2] = phi_dot;
    let m12 = (m1 + m2) * l1 * c1;
    let m13 = m2 * l2 * c2;
    let m23 = m2 * l1 * l2 * c12;
    let mass = [
        [p.cart_mass + m1 + m2, m12, m13],
        [m12, (m1 + m2) * l1 * l1, m23],
        [m13, m23, m2 * l2 * l2],
    ];
    let rhs = [
        force + (m1 + m2) * l1 * s1 * w1 * w1 + m2 * l2 * s2 * w2 * w2 - p.cart_friction * x_dot,
        (m1 + m2) * g * l1 * s1 - m2 * l1 * l2 * s12 * w2 * w2 - p.joint_damping * w1,
        m2 * g * l2 * s2 + m2 * l1 * l2 * s12 * w1 * w1 - p.joint_damping * w2,
    ];
    solve3(mass, rhs)
}

/// Advances the cart-pole system by `dt` under a horizontal cart force (newtons).
pub fn idp_dynamics_step(s: &IdpState, force: f64, p: &IdpParams, dt: f64) -> Result<IdpState> {
    let y = [s.x, s.phi[0], s.phi[1], s.x_dot, s.phi_dot[0], s.phi_dot[1]];
    let [x, p1, p2, xd, w1, w2] = rk4_step(y, dt, |y| {
        let [ax, a1, a2] = accelerations(y[3], [y[1], y[2]], [y[4], y[5]], force, p);
        [y[3], y[4], y[5], ax, a1, a2]
    });
    let mut next = IdpState { x, x_dot: xd, phi: [p1, p2], phi_dot: [w1, w2], step_count: s.step_count };
    ensure_finite(
        &[next.x, next.x_dot, next.phi[0], next.phi[1], next.phi_dot[0], next.phi_dot[1]],
        "double pendulum",
    )?;
    next.phi = [wrap_angle(next.phi[0]), wrap_angle(next.phi[1])];
    Ok(next)
}

/// Total mechanical energy (kinetic plus gravitational, zero at the rail).
pub fn idp_energy(s: &IdpState, p: &IdpParams) -> f64 {
    let [m1, m2] = p.pole_masses;
    let [l1, l2] = p.pole_lengths;
    let (s1, c1) = sin_cos(s.phi[0]);
    let (s2, c2) = sin_cos(s.phi[1]);
    let [w1, w2] = s.phi_dot;
    let v1 = [s.x_dot + l1 * c1 * w1, -l1 * s1 * w1];
    let v2 = [v1[0] + l2 * c2 * w2, v1[1] - l2 * s2 * w2];
    let kinetic = 0.5 * p.cart_mass * s.x_dot * s.x_dot
        + 0.5 * m1 * (v1[0] * v1[0] + v1[1] * v1[1])
        + 0.5 * m2 * (v2[0] * v2[0] + v2[1] * v2[1]);
    let potential = p.gravity * (m1 * l1 * c1 + m2 * (l1 * c1 + l2 * c2));
    kinetic + potential
}

#[derive(Debug, Clone)]
pub struct DoublePendulumCart {
    params: IdpParams,
    spec: EnvSpec,
    state: IdpState,
    clock: EpisodeClock,
}

impl DoublePendulumCart {
    pub fn new(params: IdpParams) -> Result<Self> {
        let spec = EnvSpec::new(
            BoxSpace::unbounded(11)?,
            BoxSpace::uniform(1, -1.0, 1.0)?,
            params.max_steps,
            params.dt,
        )?;
        Ok(Self {
            params,
            spec,
            state: IdpState::default(),
            clock: EpisodeClock::default(),
        })
    }

    pub fn params(&self) -> &IdpParams {
        &self.params
    }

    pub fn state(&self) -> &IdpState {
        &self.state
    }

    pub fn set_state(&mut self, state: IdpState) -> Vec<f64> {
        self.state = IdpState { step_count: 0, ..state };
        self.clock.start();
        idp_observe(&self.state)
    }
}

impl Default for DoublePendulumCart {
    fn default() -> Self {
        Self::new(IdpParams::default()).expect("valid default params")
    }
}

impl Environment for DoublePendulumCart {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        let mut rng = SeededRng::new(seed);
        let n = self.params.init_noise;
        let phi = [rng.uniform_range(-n, n), rng.uniform_range(-n, n)];
        Ok(self.set_state(IdpState {
            phi,
            ..IdpState::default()
        }))
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let a = self.spec.action_space.clip(action)?;
        self.clock.begin_step()?;
        let force = self.params.gear * a[0];
        let next = match idp_dynamics_step(&self.state, force, &self.params, self.params.dt) {
            Ok(s) => s,
            Err(e) => {
                self.clock.abort();
                return Err(e);
            }
        };
        self.state = IdpState {
            step_count: self.clock.steps(),
            ..next
        };
        let y = tip_height(&self.state, &self.params);
        let breakdown = reward_idp(
            tip_x(&self.state, &self.params),
            y,
            self.state.phi_dot[0],
            self.state.phi_dot[1],
        );
        let (done, truncated) = self.clock.finish_step(y <= self.params.fall_height, self.params.max_steps);
        Ok(StepResult {
            observation: idp_observe(&self.state),
            reward: breakdown.reward,
            done,
            truncated,
            info: breakdown.components,
        })
    }
}
