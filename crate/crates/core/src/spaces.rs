//! Continuous box spaces and the values exchanged with environments.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Rectangular continuous space with per-dimension bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpace {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl BoxSpace {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        Error::check_dim(low.len(), high.len())?;
        if low.is_empty() {
            return Err(Error::InvalidInput("box space must have at least one dimension".into()));
        }
        for (i, (lo, hi)) in low.iter().zip(&high).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::InvalidInput(format!(
                    "dimension {i}: bounds [{lo}, {hi}] are not ordered"
                )));
            }
        }
        Ok(Self { low, high })
    }

    /// The same `[lo, hi]` interval repeated `dim` times.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(alloc::vec![lo; dim], alloc::vec![hi; dim])
    }

    pub fn unbounded(dim: usize) -> Result<Self> {
        Self::uniform(dim, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn is_bounded(&self) -> bool {
        self.low.iter().chain(&self.high).all(|v| v.is_finite())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    pub fn clip(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dim(), x.len())?;
        Ok(x.iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(v, (lo, hi))| v.max(*lo).min(*hi))
            .collect())
    }

    /// One uniform draw per dimension. Requires finite bounds.
    pub fn sample_uniform(&self, rng: &mut SeededRng) -> Result<Vec<f64>> {
        if !self.is_bounded() {
            return Err(Error::UnsupportedSpace(
                "cannot sample uniformly from a space with infinite bounds".into(),
            ));
        }
        Ok(self
            .low
            .iter()
            .zip(&self.high)
            .map(|(lo, hi)| rng.uniform_range(*lo, *hi))
            .collect())
    }
}

/// Free-function form of [`BoxSpace::clip`].
pub fn clip_to_space(space: &BoxSpace, x: &[f64]) -> Result<Vec<f64>> {
    space.clip(x)
}

pub fn sample_uniform(space: &BoxSpace, rng: &mut SeededRng) -> Result<Vec<f64>> {
    space.sample_uniform(rng)
}

/// One `(s, a, r, s', done)` tuple. `done` marks a true terminal state, not a
/// time-limit truncation, so bootstrapping can be masked correctly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Named reward components and other per-step diagnostics.
pub type Info = BTreeMap<&'static str, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// Episode over, either by termination or by the step limit.
    pub done: bool,
    /// Set when `done` was caused only by the step limit.
    pub truncated: bool,
    pub info: Info,
}

impl StepResult {
    pub fn terminated(&self) -> bool {
        self.done && !self.truncated
    }
}

/// Summary of one finished training episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    /// Undiscounted sum of rewards.
    pub episode_return: f64,
    /// Epsilon for tabular runs, OU noise scale for DDPG runs.
    pub exploration: f64,
    pub steps: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn clip_examples() {
        let s = BoxSpace::uniform(1, -25.0, 25.0).unwrap();
        assert_eq!(s.clip(&[30.0]).unwrap(), vec![25.0]);
        let s = BoxSpace::uniform(2, -1.0, 1.0).unwrap();
        assert_eq!(s.clip(&[0.5, -0.5]).unwrap(), vec![0.5, -0.5]);
        assert_eq!(s.clip(&[-3.0, 3.0]).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn clip_dimension_mismatch() {
        let s = BoxSpace::uniform(2, -1.0, 1.0).unwrap();
        assert_eq!(
            s.clip(&[0.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn rejects_inverted_bounds() {
        assert!(BoxSpace::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxSpace::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn sample_degenerate_interval() {
        let s = BoxSpace::uniform(3, 0.0, 0.0).unwrap();
        let mut rng = SeededRng::new(11);
        assert_eq!(s.sample_uniform(&mut rng).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn sample_infinite_bounds_rejected() {
        let s = BoxSpace::unbounded(2).unwrap();
        let mut rng = SeededRng::new(0);
        assert!(matches!(
            s.sample_uniform(&mut rng),
            Err(Error::UnsupportedSpace(_))
        ));
    }

    #[test]
    fn sample_uniform_mean() {
        let s = BoxSpace::uniform(1, -1.0, 1.0).unwrap();
        let mut rng = SeededRng::new(2024);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += s.sample_uniform(&mut rng).unwrap()[0];
        }
        // std of the mean is 1/sqrt(3n) ~ 5.8e-4
        assert!((sum / n as f64).abs() < 0.01);
    }

    #[test]
    fn sample_is_deterministic() {
        let s = BoxSpace::uniform(4, -2.0, 3.0).unwrap();
        let a = s.sample_uniform(&mut SeededRng::new(8)).unwrap();
        let b = s.sample_uniform(&mut SeededRng::new(8)).unwrap();
        assert_eq!(a, b);
        assert!(s.contains(&a));
    }

    proptest! {
        #[test]
        fn clip_idempotent_and_contained(
            xs in proptest::collection::vec(-100.0f64..100.0, 3),
            lo in -10.0f64..0.0,
            width in 0.0f64..20.0,
        ) {
            let s = BoxSpace::uniform(3, lo, lo + width).unwrap();
            let once = s.clip(&xs).unwrap();
            let twice = s.clip(&once).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(s.contains(&once));
        }
    }
}
