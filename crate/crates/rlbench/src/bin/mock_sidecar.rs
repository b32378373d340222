//! Stand-in environment server for bridge tests.

use std::io::{self, BufReader};
use std::net::TcpListener;
use std::process::ExitCode;

use clap::Parser;
use rlbench::mock::{serve, Fault, MockOptions};

#[derive(Debug, Parser)]
#[command(name = "mock-sidecar", about = "Scripted environment server speaking the rlbench bridge protocol")]
struct Args {
    #[arg(long, default_value_t = 3)]
    obs_dim: usize,
    #[arg(long, default_value_t = 2)]
    act_dim: usize,
    #[arg(long, default_value_t = 1000)]
    max_steps: usize,
    #[arg(long, default_value_t = 1.0)]
    act_bound: f64,
    /// Misbehave on one request: wrong-id@ID, garbage@ID, error@ID, exit@ID or silent@ID.
    #[arg(long)]
    fault: Vec<Fault>,
    /// Accepted for launch-line compatibility; the mock ignores it.
    #[arg(long)]
    env: Option<String>,
    /// Serve one connection on 127.0.0.1:PORT instead of stdio.
    #[arg(long)]
    tcp: Option<u16>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.obs_dim == 0 || args.act_dim == 0 {
        eprintln!("mock-sidecar: dimensions must be positive");
        return ExitCode::from(2);
    }
    let opts = MockOptions {
        obs_dim: args.obs_dim,
        act_dim: args.act_dim,
        max_steps: args.max_steps.max(1),
        act_bound: args.act_bound,
        faults: args.fault,
    };
    let result = match args.tcp {
        None => serve(io::stdin().lock(), io::stdout().lock(), opts),
        Some(port) => TcpListener::bind(("127.0.0.1", port)).and_then(|listener| {
            eprintln!("mock-sidecar: listening on {}", listener.local_addr()?);
            let (stream, _) = listener.accept()?;
            serve(BufReader::new(stream.try_clone()?), stream, opts)
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mock-sidecar: {e}");
            ExitCode::FAILURE
        }
    }
}
