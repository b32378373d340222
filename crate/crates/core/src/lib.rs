//! Allocation-only reinforcement-learning core.
//!
//! Everything here is pure computation over `alloc` containers: box spaces,
//! reward composers, the two built-in contact-free simulators (a planar
//! two-link reacher and a double pendulum on a cart), observation/action
//! bucketing, tabular Q-learning and SARSA, a small dense network with
//! manual backpropagation and Adam, and a DDPG agent built on top of it.
//!
//! File formats, the CLI, the experiment harness and the external
//! environment bridge live in the `rlbench` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ddpg;
pub mod discretizer;
pub mod envs;
pub mod error;
pub mod mlp;
pub mod rewards;
pub mod rng;
pub mod spaces;
pub mod tabular;

pub use error::{Error, Result};
pub use rng::SeededRng;
pub use spaces::{BoxSpace, EpisodeLog, StepResult, Transition};
