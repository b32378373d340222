//! On-disk formats: fitted ranges (JSON), Q-tables, network blobs and DDPG
//! agent archives.
//!
//! The binary formats share one layout: a 4-byte magic, a little-endian
//! `u32` header length, a UTF-8 JSON header, then a payload. Floats in
//! payloads are little-endian `f64`.

use std::fs;
use std::path::Path;

use rlbench_core::ddpg::{DdpgAgent, DdpgConfig};
use rlbench_core::discretizer::RangeSpec;
use rlbench_core::mlp::{LayerSpec, MlpNet};
use rlbench_core::rng::RngState;
use rlbench_core::tabular::QTable;
use rlbench_core::BoxSpace;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const QTABLE_MAGIC: &[u8; 4] = b"RLQT";
pub const NETWORK_MAGIC: &[u8; 4] = b"RLNN";
pub const AGENT_MAGIC: &[u8; 4] = b"RLAG";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("truncated input: {0}")]
    Truncated(&'static str),
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error(transparent)]
    Core(#[from] rlbench_core::Error),
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn write_framed<H: Serialize>(magic: &[u8; 4], header: &H, payload: &[u8]) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(header)?;
    let len = u32::try_from(header.len()).map_err(|_| FormatError::Truncated("header too large"))?;
    let mut out = Vec::with_capacity(8 + header.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(payload);
    Ok(out)
}

fn read_framed<'a, H: DeserializeOwned>(magic: &[u8; 4], bytes: &'a [u8]) -> Result<(H, &'a [u8])> {
    if bytes.len() < 8 {
        return Err(FormatError::Truncated("missing magic or header length"));
    }
    if &bytes[..4] != magic {
        return Err(FormatError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
            found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
        });
    }
    let len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let rest = &bytes[8..];
    if rest.len() < len {
        return Err(FormatError::Truncated("header"));
    }
    Ok((serde_json::from_slice(&rest[..len])?, &rest[len..]))
}

fn f64s_to_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn bytes_to_f64s(bytes: &[u8], count: usize) -> Result<Vec<f64>> {
    if bytes.len() != count * 8 {
        return Err(FormatError::Truncated("float payload length does not match header"));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn write_range_spec(path: &Path, spec: &RangeSpec) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(spec)?)?;
    Ok(())
}

pub fn read_range_spec(path: &Path) -> Result<RangeSpec> {
    let spec: RangeSpec = serde_json::from_slice(&fs::read(path)?)?;
    Ok(RangeSpec::new(spec.dims, spec.k)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct QTableHeader {
    version: u32,
    n_states: usize,
    n_actions: usize,
    init_value: f64,
}

pub fn encode_qtable(table: &QTable) -> Result<Vec<u8>> {
    let header = QTableHeader {
        version: FORMAT_VERSION,
        n_states: table.n_states(),
        n_actions: table.n_actions(),
        init_value: table.init_value(),
    };
    write_framed(QTABLE_MAGIC, &header, &f64s_to_bytes(table.values()))
}

pub fn decode_qtable(bytes: &[u8]) -> Result<QTable> {
    let (h, payload): (QTableHeader, _) = read_framed(QTABLE_MAGIC, bytes)?;
    if h.version != FORMAT_VERSION {
        return Err(FormatError::Version(h.version));
    }
    let count = h.n_states.checked_mul(h.n_actions).ok_or(FormatError::Truncated("table size overflows"))?;
    let values = bytes_to_f64s(payload, count)?;
    Ok(QTable::from_values(h.n_states, h.n_actions, h.init_value, values)?)
}

/// Header of a network blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    pub version: u32,
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
    pub step_count: u64,
}

pub fn encode_network(net: &MlpNet, seed: u64, step_count: u64) -> Result<Vec<u8>> {
    let meta = NetworkMeta {
        version: FORMAT_VERSION,
        layers: net.specs(),
        seed,
        step_count,
    };
    write_framed(NETWORK_MAGIC, &meta, &f64s_to_bytes(&net.params()))
}

pub fn decode_network(bytes: &[u8]) -> Result<(MlpNet, NetworkMeta)> {
    let (meta, payload): (NetworkMeta, _) = read_framed(NETWORK_MAGIC, bytes)?;
    if meta.version != FORMAT_VERSION {
        return Err(FormatError::Version(meta.version));
    }
    let count = meta.layers.iter().map(LayerSpec::param_count).sum();
    let params = bytes_to_f64s(payload, count)?;
    let net = MlpNet::from_params(&meta.layers, &params)?;
    Ok((net, meta))
}

/// JSON metadata stored in an agent archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMeta {
    pub version: u32,
    pub config: DdpgConfig,
    pub action_space: BoxSpace,
    pub episode: usize,
    pub rng: RngState,
    pub actor_steps: u64,
    pub critic_steps: u64,
}

/// Archive layout: framed metadata, then four length-prefixed network blobs
/// in the order actor, critic, target actor, target critic.
pub fn encode_agent(agent: &DdpgAgent, episode: usize, rng: RngState) -> Result<Vec<u8>> {
    let meta = AgentMeta {
        version: FORMAT_VERSION,
        config: agent.cfg.clone(),
        action_space: agent.action_space.clone(),
        episode,
        rng,
        actor_steps: agent.actor_adam.t,
        critic_steps: agent.critic_adam.t,
    };
    let seed = rng.seed;
    let mut payload = Vec::new();
    for (net, steps) in [
        (&agent.actor, meta.actor_steps),
        (&agent.critic, meta.critic_steps),
        (&agent.target_actor, meta.actor_steps),
        (&agent.target_critic, meta.critic_steps),
    ] {
        let blob = encode_network(net, seed, steps)?;
        payload.extend_from_slice(&(blob.len() as u64).to_le_bytes());
        payload.extend_from_slice(&blob);
    }
    write_framed(AGENT_MAGIC, &meta, &payload)
}

/// Rebuilds an agent; optimizer moments and the replay buffer start empty.
pub fn decode_agent(bytes: &[u8]) -> Result<(DdpgAgent, AgentMeta)> {
    let (meta, mut rest): (AgentMeta, _) = read_framed(AGENT_MAGIC, bytes)?;
    if meta.version != FORMAT_VERSION {
        return Err(FormatError::Version(meta.version));
    }
    let mut nets = Vec::with_capacity(4);
    for _ in 0..4 {
        if rest.len() < 8 {
            return Err(FormatError::Truncated("network length prefix"));
        }
        let len = u64::from_le_bytes(rest[..8].try_into().expect("8 bytes")) as usize;
        rest = &rest[8..];
        if rest.len() < len {
            return Err(FormatError::Truncated("network blob"));
        }
        nets.push(decode_network(&rest[..len])?.0);
        rest = &rest[len..];
    }
    if !rest.is_empty() {
        return Err(FormatError::Truncated("trailing bytes after agent archive"));
    }
    let target_critic = nets.pop().expect("four nets");
    let target_actor = nets.pop().expect("four nets");
    let critic = nets.pop().expect("four nets");
    let actor = nets.pop().expect("four nets");
    let mut agent = DdpgAgent::from_networks(actor, critic, meta.action_space.clone(), meta.config.clone())?;
    agent.target_actor.set_params(&target_actor.params())?;
    agent.target_critic.set_params(&target_critic.params())?;
    agent.actor_adam.t = meta.actor_steps;
    agent.critic_adam.t = meta.critic_steps;
    Ok((agent, meta))
}
