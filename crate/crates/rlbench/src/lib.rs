//! Standard-library side of rlbench: run configuration, the experiment
//! harness and CLI, on-disk formats, and the bridge to external environment
//! servers.

pub mod bridge;
pub mod cli;
pub mod config;
pub mod formats;
pub mod harness;
pub mod mock;

pub use config::RunConfig;
pub use harness::{run_experiment, sweep, HarnessError, RunArtifact};
