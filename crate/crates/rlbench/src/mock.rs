//! A scripted environment server speaking the bridge protocol, used to test
//! the client without any external simulator.
//!
//! Dynamics: `obs[0]` is the step counter, `obs[1]` the sum of the last
//! action, the last slot the reset seed modulo 1000; the reward is
//! `1 - |a|^2`. Episodes end (truncated) after `max_steps` steps.

use std::io::{BufRead, Write};

use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    /// Answer with `id + 1`.
    WrongId,
    /// Answer with a line that is not JSON.
    Garbage,
    /// Answer `ok: false` with a fixed message.
    Error,
    /// Exit without answering.
    Exit,
    /// Never answer this request, keep reading.
    Silent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fault {
    pub kind: FaultKind,
    /// Request id that triggers the fault.
    pub at_id: u64,
}

impl std::str::FromStr for Fault {
    type Err = String;

    /// `KIND@ID`, e.g. `wrong-id@5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, at) = s.split_once('@').ok_or_else(|| format!("fault {s:?} is not KIND@ID"))?;
        let kind = match kind {
            "wrong-id" => FaultKind::WrongId,
            "garbage" => FaultKind::Garbage,
            "error" => FaultKind::Error,
            "exit" => FaultKind::Exit,
            "silent" => FaultKind::Silent,
            other => return Err(format!("unknown fault kind {other:?}")),
        };
        let at_id = at.parse().map_err(|e| format!("bad fault id {at:?}: {e}"))?;
        Ok(Fault { kind, at_id })
    }
}

pub const REMOTE_FAULT_MESSAGE: &str = "simulated failure inside the wrapped environment";

#[derive(Debug, Clone, PartialEq)]
pub struct MockOptions {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub max_steps: usize,
    pub act_bound: f64,
    pub faults: Vec<Fault>,
}

impl Default for MockOptions {
    fn default() -> Self {
        Self {
            obs_dim: 3,
            act_dim: 2,
            max_steps: 1000,
            act_bound: 1.0,
            faults: Vec::new(),
        }
    }
}

struct MockEnv {
    opts: MockOptions,
    step: usize,
    seed: u64,
    live: bool,
}

impl MockEnv {
    fn observe(&self, action_sum: f64) -> Vec<f64> {
        let mut obs = vec![0.0; self.opts.obs_dim];
        obs[0] = self.step as f64;
        if self.opts.obs_dim > 1 {
            obs[1] = action_sum;
        }
        if self.opts.obs_dim > 2 {
            obs[self.opts.obs_dim - 1] = (self.seed % 1000) as f64;
        }
        obs
    }

    fn handle(&mut self, req: &Value) -> Result<Value, String> {
        let cmd = req.get("cmd").and_then(Value::as_str).ok_or("missing cmd")?;
        match cmd {
            "spec" => Ok(json!({
                "obs_dim": self.opts.obs_dim,
                "act_dim": self.opts.act_dim,
                "act_low": vec![-self.opts.act_bound; self.opts.act_dim],
                "act_high": vec![self.opts.act_bound; self.opts.act_dim],
                "max_steps": self.opts.max_steps,
                "seedable": true,
            })),
            "reset" => {
                self.seed = req.get("seed").and_then(Value::as_u64).unwrap_or(0);
                self.step = 0;
                self.live = true;
                Ok(json!({ "obs": self.observe(0.0) }))
            }
            "step" => {
                if !self.live {
                    return Err("step without an active episode".into());
                }
                let action: Vec<f64> = req
                    .get("action")
                    .and_then(Value::as_array)
                    .ok_or("missing action")?
                    .iter()
                    .map(|v| v.as_f64().ok_or("action entries must be numbers"))
                    .collect::<Result<_, _>>()?;
                if action.len() != self.opts.act_dim {
                    return Err(format!("expected {} action values, got {}", self.opts.act_dim, action.len()));
                }
                self.step += 1;
                let done = self.step >= self.opts.max_steps;
                self.live = !done;
                Ok(json!({
                    "obs": self.observe(action.iter().sum()),
                    "reward": 1.0 - action.iter().map(|a| a * a).sum::<f64>(),
                    "done": done,
                    "truncated": done,
                }))
            }
            "close" => Ok(json!({})),
            other => Err(format!("unknown cmd {other:?}")),
        }
    }
}

fn respond(out: &mut impl Write, id: i64, body: Result<Value, String>) -> std::io::Result<()> {
    let msg = match body {
        Ok(Value::Object(mut fields)) => {
            let mut m = serde_json::Map::new();
            m.insert("id".into(), json!(id));
            m.insert("ok".into(), json!(true));
            m.append(&mut fields);
            Value::Object(m)
        }
        Ok(_) => json!({ "id": id, "ok": true }),
        Err(e) => json!({ "id": id, "ok": false, "error": e }),
    };
    writeln!(out, "{msg}")?;
    out.flush()
}

/// Serves requests until `close` or end of input.
pub fn serve(input: impl BufRead, mut output: impl Write, opts: MockOptions) -> std::io::Result<()> {
    let mut env = MockEnv {
        opts,
        step: 0,
        seed: 0,
        live: false,
    };
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                respond(&mut output, -1, Err(format!("unparseable request: {e}")))?;
                continue;
            }
        };
        let id = req.get("id").and_then(Value::as_i64).unwrap_or(-1);
        match env.opts.faults.iter().find(|f| f.at_id as i64 == id).map(|f| f.kind) {
            Some(FaultKind::WrongId) => {
                let body = env.handle(&req);
                respond(&mut output, id + 1, body)?;
                continue;
            }
            Some(FaultKind::Garbage) => {
                writeln!(output, "this is not json {{")?;
                output.flush()?;
                continue;
            }
            Some(FaultKind::Error) => {
                respond(&mut output, id, Err(REMOTE_FAULT_MESSAGE.into()))?;
                continue;
            }
            Some(FaultKind::Exit) => return Ok(()),
            Some(FaultKind::Silent) => continue,
            None => {}
        }
        let is_close = req.get("cmd").and_then(Value::as_str) == Some("close");
        let body = env.handle(&req);
        respond(&mut output, id, body)?;
        if is_close {
            return Ok(());
        }
    }
    Ok(())
}
