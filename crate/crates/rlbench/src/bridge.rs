//! Client side of the line-delimited JSON environment protocol.
//!
//! Each request is one JSON object on one LF-terminated line carrying a
//! strictly increasing `id` and a `cmd` (`spec`, `reset`, `step`, `close`).
//! The peer answers every request with exactly one line echoing the id.
//! Requests are synchronous; there is never more than one in flight.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use rlbench_core::envs::{EnvSpec, Environment, EpisodeClock};
use rlbench_core::spaces::Info;
use rlbench_core::{BoxSpace, StepResult};
use serde::{Deserialize, Serialize};

pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;
const DEFAULT_MAX_STEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Stdio,
    Tcp(SocketAddr),
}

impl std::str::FromStr for Transport {
    type Err = BridgeError;

    /// `stdio` or `tcp:HOST:PORT`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "stdio" {
            return Ok(Transport::Stdio);
        }
        let addr = s
            .strip_prefix("tcp:")
            .ok_or_else(|| BridgeError::Config(format!("unknown transport {s:?}; use stdio or tcp:HOST:PORT")))?;
        addr.parse()
            .map(Transport::Tcp)
            .map_err(|e| BridgeError::Config(format!("bad tcp address {addr:?}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeSpec {
    /// Program and arguments, separated by whitespace. May be empty for TCP
    /// when the server is already running.
    pub command: String,
    /// Passed to the launched process as `--env NAME` when non-empty.
    pub env_name: String,
    pub transport: Transport,
    pub timeout_ms: u64,
}

impl BridgeSpec {
    pub fn stdio(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            env_name: String::new(),
            transport: Transport::Stdio,
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }

    pub fn validate(&self) -> Result<(), BridgeError> {
        if self.timeout_ms == 0 {
            return Err(BridgeError::Config("timeout must be positive".into()));
        }
        if self.transport == Transport::Stdio && self.command.trim().is_empty() {
            return Err(BridgeError::Config("stdio transport needs a launch command".into()));
        }
        Ok(())
    }

    fn argv(&self) -> Vec<String> {
        let mut argv: Vec<String> = self.command.split_whitespace().map(str::to_owned).collect();
        if !argv.is_empty() && !self.env_name.is_empty() {
            argv.push("--env".into());
            argv.push(self.env_name.clone());
        }
        argv
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error("bridge configuration error: {0}")]
    Config(String),
    #[error("bridge unavailable: {0}")]
    Unavailable(String),
    #[error("bridge timed out after {0} ms waiting for a response")]
    Timeout(u64),
    #[error("bridge protocol error: {message}; offending line: {line}")]
    Protocol { message: String, line: String },
    #[error("bridge connection error: {0}")]
    Connection(String),
    #[error("remote environment error: {0}")]
    Remote(String),
}

impl From<BridgeError> for rlbench_core::Error {
    fn from(e: BridgeError) -> Self {
        match e {
            BridgeError::Config(m) => rlbench_core::Error::InvalidInput(m),
            BridgeError::Protocol { .. } => rlbench_core::Error::Protocol(e.to_string()),
            BridgeError::Remote(m) => rlbench_core::Error::Remote(m),
            other => rlbench_core::Error::Connection(other.to_string()),
        }
    }
}

#[derive(Debug, Serialize)]
struct Request<'a> {
    id: u64,
    cmd: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    action: Option<&'a [f64]>,
}

/// A decoded response line. Only `id` and `ok` are always present.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Response {
    pub id: i64,
    pub ok: bool,
    #[serde(default)]
    pub obs: Option<Vec<f64>>,
    #[serde(default)]
    pub reward: Option<f64>,
    #[serde(default)]
    pub done: Option<bool>,
    #[serde(default)]
    pub truncated: Option<bool>,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub obs_dim: Option<usize>,
    #[serde(default)]
    pub act_dim: Option<usize>,
    #[serde(default)]
    pub act_low: Option<Vec<f64>>,
    #[serde(default)]
    pub act_high: Option<Vec<f64>>,
    #[serde(default)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub truncated: bool,
}

enum Incoming {
    Line(String),
    Failed(String),
}

/// One connection to an environment server.
pub struct BridgeClient {
    writer: Box<dyn Write + Send>,
    lines: Receiver<Incoming>,
    child: Option<Child>,
    next_id: u64,
    timeout: Duration,
    closed: bool,
}

impl std::fmt::Debug for BridgeClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeClient")
            .field("next_id", &self.next_id)
            .field("timeout", &self.timeout)
            .field("closed", &self.closed)
            .finish()
    }
}

impl BridgeClient {
    /// Launches (if configured) and connects to the server described by `spec`.
    pub fn connect(spec: &BridgeSpec) -> Result<Self, BridgeError> {
        spec.validate()?;
        let timeout = Duration::from_millis(spec.timeout_ms);
        let argv = spec.argv();
        match &spec.transport {
            Transport::Stdio => {
                let mut child = Command::new(&argv[0])
                    .args(&argv[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| BridgeError::Unavailable(format!("cannot launch {:?}: {e}", argv[0])))?;
                let stdin: ChildStdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                let mut client = Self::from_streams(BufReader::new(stdout), stdin, timeout);
                client.child = Some(child);
                Ok(client)
            }
            Transport::Tcp(addr) => {
                let child = if argv.is_empty() {
                    None
                } else {
                    Some(
                        Command::new(&argv[0])
                            .args(&argv[1..])
                            .stdin(Stdio::null())
                            .stdout(Stdio::null())
                            .stderr(Stdio::inherit())
                            .spawn()
                            .map_err(|e| BridgeError::Unavailable(format!("cannot launch {:?}: {e}", argv[0])))?,
                    )
                };
                let deadline = Instant::now() + timeout;
                let stream = loop {
                    match TcpStream::connect_timeout(addr, timeout) {
                        Ok(s) => break s,
                        Err(e) if Instant::now() >= deadline => {
                            if let Some(mut c) = child {
                                let _ = c.kill();
                                let _ = c.wait();
                            }
                            return Err(BridgeError::Unavailable(format!("cannot connect to {addr}: {e}")));
                        }
                        Err(_) => thread::sleep(Duration::from_millis(20)),
                    }
                };
                stream.set_nodelay(true).ok();
                let reader = stream
                    .try_clone()
                    .map_err(|e| BridgeError::Connection(format!("cannot clone tcp stream: {e}")))?;
                let mut client = Self::from_streams(BufReader::new(reader), stream, timeout);
                client.child = child;
                Ok(client)
            }
        }
    }

    /// Wraps an already-connected byte stream pair.
    pub fn from_streams<R, W>(reader: R, writer: W, timeout: Duration) -> Self
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = reader;
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Incoming::Line(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Incoming::Failed(e.to_string()));
                        break;
                    }
                }
            }
        });
        Self {
            writer: Box::new(writer),
            lines: rx,
            child: None,
            next_id: 1,
            timeout,
            closed: false,
        }
    }

    /// Id that the next request will carry.
    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    fn exit_note(&mut self) -> String {
        match self.child.as_mut().map(Child::try_wait) {
            Some(Ok(Some(status))) => format!(" (server exited with {status})"),
            _ => String::new(),
        }
    }

    fn request(&mut self, cmd: &str, seed: Option<u64>, action: Option<&[f64]>) -> Result<Response, BridgeError> {
        if self.closed {
            return Err(BridgeError::Connection("connection already closed".into()));
        }
        let id = self.next_id;
        self.next_id += 1;
        let mut line = serde_json::to_string(&Request { id, cmd, seed, action })
            .map_err(|e| BridgeError::Connection(format!("cannot encode request: {e}")))?;
        line.push('\n');
        if let Err(e) = self.writer.write_all(line.as_bytes()).and_then(|_| self.writer.flush()) {
            let note = self.exit_note();
            return Err(BridgeError::Connection(format!("cannot send request {id}: {e}{note}")));
        }
        let raw = match self.lines.recv_timeout(self.timeout) {
            Ok(Incoming::Line(l)) => l,
            Ok(Incoming::Failed(e)) => return Err(BridgeError::Connection(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => return Err(BridgeError::Timeout(self.timeout.as_millis() as u64)),
            Err(RecvTimeoutError::Disconnected) => {
                let note = self.exit_note();
                return Err(BridgeError::Connection(format!("server closed the stream{note}")));
            }
        };
        let text = raw.strip_suffix('\n').unwrap_or(&raw);
        let protocol = |message: String| BridgeError::Protocol { message, line: text.to_owned() };
        let resp: Response = serde_json::from_str(text).map_err(|e| protocol(format!("malformed response: {e}")))?;
        if resp.id != id as i64 {
            return Err(protocol(format!("response id {} does not match request id {id}", resp.id)));
        }
        if !resp.ok {
            return Err(BridgeError::Remote(resp.error.unwrap_or_else(|| "unspecified error".into())));
        }
        Ok(resp)
    }

    pub fn spec(&mut self) -> Result<EnvSpec, BridgeError> {
        let resp = self.request("spec", None, None)?;
        let bad = |m: &str| BridgeError::Protocol {
            message: m.into(),
            line: format!("{resp:?}"),
        };
        let obs_dim = resp.obs_dim.filter(|d| *d > 0).ok_or_else(|| bad("obs_dim missing or zero"))?;
        let act_dim = resp.act_dim.filter(|d| *d > 0).ok_or_else(|| bad("act_dim missing or zero"))?;
        let low = resp.act_low.clone().unwrap_or_else(|| vec![-1.0; act_dim]);
        let high = resp.act_high.clone().unwrap_or_else(|| vec![1.0; act_dim]);
        if low.len() != act_dim || high.len() != act_dim {
            return Err(bad("action bounds do not match act_dim"));
        }
        if low.iter().chain(&high).any(|v| !v.is_finite()) {
            return Err(bad("action bounds must be finite"));
        }
        let action_space = BoxSpace::new(low, high).map_err(|e| bad(&e.to_string()))?;
        let observation_space = BoxSpace::unbounded(obs_dim).map_err(|e| bad(&e.to_string()))?;
        let max_steps = resp.max_steps.unwrap_or(DEFAULT_MAX_STEPS);
        EnvSpec::new(observation_space, action_space, max_steps, 1.0).map_err(|e| bad(&e.to_string()))
    }

    pub fn reset(&mut self, seed: u64) -> Result<Vec<f64>, BridgeError> {
        let resp = self.request("reset", Some(seed), None)?;
        resp.obs.ok_or_else(|| BridgeError::Protocol {
            message: "reset response lacks obs".into(),
            line: format!("{:?}", resp.id),
        })
    }

    pub fn step(&mut self, action: &[f64]) -> Result<RemoteStep, BridgeError> {
        let resp = self.request("step", None, Some(action))?;
        match (resp.obs, resp.reward, resp.done) {
            (Some(obs), Some(reward), Some(done)) => Ok(RemoteStep {
                obs,
                reward,
                done,
                truncated: resp.truncated.unwrap_or(false),
            }),
            _ => Err(BridgeError::Protocol {
                message: "step response needs obs, reward and done".into(),
                line: format!("id {}", resp.id),
            }),
        }
    }

    /// Sends `close` and reaps the server process. Idempotent.
    pub fn close(&mut self) -> Result<(), BridgeError> {
        if self.closed {
            return Ok(());
        }
        let out = self.request("close", None, None).map(|_| ());
        self.closed = true;
        if let Some(mut child) = self.child.take() {
            let deadline = Instant::now() + Duration::from_millis(500);
            loop {
                match child.try_wait() {
                    Ok(Some(_)) => break,
                    Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(5)),
                    _ => {
                        let _ = child.kill();
                        let _ = child.wait();
                        break;
                    }
                }
            }
        }
        out
    }
}

impl Drop for BridgeClient {
    fn drop(&mut self) {
        if !self.closed {
            self.timeout = self.timeout.min(Duration::from_millis(500));
            let _ = self.close();
        }
    }
}

/// Connects and performs the `spec` exchange. Timeouts here are reported as
/// an unavailable bridge.
pub fn bridge_handshake(spec: &BridgeSpec) -> Result<(BridgeClient, EnvSpec), BridgeError> {
    let mut client = BridgeClient::connect(spec)?;
    let env_spec = client.spec().map_err(|e| match e {
        BridgeError::Timeout(ms) => BridgeError::Unavailable(format!("no spec response within {ms} ms")),
        BridgeError::Connection(m) => BridgeError::Unavailable(m),
        other => other,
    })?;
    Ok((client, env_spec))
}

/// A remote environment behind the bridge, usable wherever a built-in one is.
#[derive(Debug)]
pub struct BridgeEnv {
    client: BridgeClient,
    spec: EnvSpec,
    clock: EpisodeClock,
}

impl BridgeEnv {
    pub fn connect(spec: &BridgeSpec) -> Result<Self, BridgeError> {
        let (client, env_spec) = bridge_handshake(spec)?;
        Ok(Self::from_client(client, env_spec))
    }

    pub fn from_client(client: BridgeClient, spec: EnvSpec) -> Self {
        Self {
            client,
            spec,
            clock: EpisodeClock::default(),
        }
    }

    pub fn client(&self) -> &BridgeClient {
        &self.client
    }

    pub fn close(&mut self) -> Result<(), BridgeError> {
        self.clock.abort();
        self.client.close()
    }

    fn check_obs(&self, obs: &[f64]) -> rlbench_core::Result<()> {
        if obs.len() != self.spec.obs_dim() {
            return Err(rlbench_core::Error::Protocol(format!(
                "server sent {} observation values, spec promised {}",
                obs.len(),
                self.spec.obs_dim()
            )));
        }
        Ok(())
    }
}

impl Environment for BridgeEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> rlbench_core::Result<Vec<f64>> {
        self.clock.abort();
        let obs = self.client.reset(seed)?;
        self.check_obs(&obs)?;
        self.clock.start();
        Ok(obs)
    }

    fn step(&mut self, action: &[f64]) -> rlbench_core::Result<StepResult> {
        let action = self.spec.action_space.clip(action)?;
        self.clock.begin_step()?;
        let out = self.client.step(&action).map_err(rlbench_core::Error::from);
        let remote = match out {
            Ok(r) => r,
            Err(e) => {
                self.clock.abort();
                return Err(e);
            }
        };
        if let Err(e) = self.check_obs(&remote.obs) {
            self.clock.abort();
            return Err(e);
        }
        let terminated = remote.done && !remote.truncated;
        let (done, truncated) = self.clock.finish_step(terminated, self.spec.max_steps);
        let (done, truncated) = if remote.done && !done { (true, true) } else { (done, truncated) };
        if done {
            self.clock.abort();
        }
        Ok(StepResult {
            observation: remote.obs,
            reward: remote.reward,
            done,
            truncated,
            info: Info::new(),
        })
    }
}
