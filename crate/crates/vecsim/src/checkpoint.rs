//! Versioned binary model container: magic, version, a JSON header with the
//! full hyperparameter record and layer widths, then all parameters as
//! little-endian 64-bit floats.

use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vecsim_core::learn::{AgentArrangement, LearnConfig, Maddpg, Mlp};

pub const MAGIC: &[u8; 8] = b"VECSIMCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    arrangement: AgentArrangement,
    n_agents: usize,
    state_dim: usize,
    action_dim: usize,
    seed: u64,
    learn: LearnConfig,
    actor_widths: Vec<usize>,
    critic_widths: Vec<usize>,
}

/// Nets in serialization order for one agent.
fn nets(agent: &vecsim_core::learn::AgentPair) -> [&Mlp; 4] {
    [&agent.actor, &agent.critic, &agent.target_actor, &agent.target_critic]
}

pub fn save(path: &Path, learner: &Maddpg, arrangement: AgentArrangement, seed: u64) -> Result<()> {
    let first = &learner.agents[0];
    let header = Header {
        arrangement,
        n_agents: learner.agents.len(),
        state_dim: first.actor.input_dim(),
        action_dim: first.actor.output_dim(),
        seed,
        learn: learner.cfg.clone(),
        actor_widths: first.actor.widths.clone(),
        critic_widths: first.critic.widths.clone(),
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_json);
    let mut params = Vec::new();
    for agent in &learner.agents {
        for net in nets(agent) {
            params.extend(net.flatten());
        }
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in &params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Maddpg, AgentArrangement)> {
    let mut file = std::fs::File::open(path)
        .with_context(|| format!("cannot open checkpoint {}", path.display()))?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic).context("checkpoint truncated before magic")?;
    if &magic != MAGIC {
        bail!("not a model checkpoint (bad magic)");
    }
    let mut word = [0u8; 4];
    file.read_exact(&mut word).context("checkpoint truncated before version")?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        bail!("unsupported checkpoint version {version} (expected {VERSION})");
    }
    let mut len8 = [0u8; 8];
    file.read_exact(&mut len8).context("checkpoint truncated before header")?;
    let mut header_json = vec![0u8; u64::from_le_bytes(len8) as usize];
    file.read_exact(&mut header_json).context("checkpoint header truncated")?;
    let header: Header =
        serde_json::from_slice(&header_json).context("malformed checkpoint header")?;
    file.read_exact(&mut len8).context("checkpoint truncated before parameters")?;
    let count = u64::from_le_bytes(len8) as usize;
    let mut raw = vec![0u8; count * 8];
    file.read_exact(&mut raw).context("checkpoint parameters truncated")?;
    let params: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();

    let mut learner = Maddpg::new(
        header.state_dim,
        header.action_dim,
        header.n_agents,
        header.learn,
        header.seed,
    );
    let first = &learner.agents[0];
    if first.actor.widths != header.actor_widths || first.critic.widths != header.critic_widths {
        bail!(
            "checkpoint widths {:?}/{:?} do not match the configured nets",
            header.actor_widths,
            header.critic_widths
        );
    }
    let mut at = 0;
    for agent in &mut learner.agents {
        for net in [
            &mut agent.actor,
            &mut agent.critic,
            &mut agent.target_actor,
            &mut agent.target_critic,
        ] {
            let need = net.flatten().len();
            if at + need > params.len() {
                bail!("checkpoint parameter block too short");
            }
            net.load_flat(&params[at..at + need]).map_err(|e| anyhow::anyhow!("{e}"))?;
            at += need;
        }
    }
    if at != params.len() {
        bail!("checkpoint has {} trailing parameters", params.len() - at);
    }
    Ok((learner, header.arrangement))
}
