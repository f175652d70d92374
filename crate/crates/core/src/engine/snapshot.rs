use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{EngineSettings, ScheduledCommand, SimState};
use crate::agent::{AgentId, AgentState};
use crate::geom::Tick;
use crate::memory::MemoryStore;
use crate::tools::SkillStore;
use crate::world::{WorldConfig, WorldMap};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SnapshotError {
    #[error("snapshot version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u32 },
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
}

#[derive(Serialize, Deserialize)]
struct World {
    config: WorldConfig,
    map: WorldMap,
}

#[derive(Serialize, Deserialize)]
struct Document {
    version: u32,
    tick: Tick,
    seed: u64,
    rng_counter: u64,
    world: World,
    agents: Vec<AgentState>,
    memories: MemoryStore,
    skills: BTreeMap<AgentId, SkillStore>,
    event_count: u64,
    next_agent_id: u32,
    pending_commands: Vec<ScheduledCommand>,
    settings: EngineSettings,
}

/// Serialize the full state. Backends (and their credentials) live outside
/// the state and are never written.
pub fn save_snapshot(state: &SimState) -> String {
    let doc = Document {
        version: SNAPSHOT_VERSION,
        tick: state.tick,
        seed: state.seed,
        rng_counter: state.rng_counter,
        world: World {
            config: state.config.clone(),
            map: state.map.clone(),
        },
        agents: state.agents.values().cloned().collect(),
        memories: state.memories.clone(),
        skills: state.skills.clone(),
        event_count: state.event_count,
        next_agent_id: state.next_agent_id,
        pending_commands: state.pending.clone(),
        settings: state.settings.clone(),
    };
    serde_json::to_string(&doc).expect("snapshot serializes")
}

pub fn load_snapshot(text: &str) -> Result<SimState, SnapshotError> {
    let value: Value = serde_json::from_str(text).map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
    let found = value
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| SnapshotError::Corrupt("missing version".into()))?;
    if found != u64::from(SNAPSHOT_VERSION) {
        return Err(SnapshotError::VersionMismatch { found, expected: SNAPSHOT_VERSION });
    }
    let doc: Document = serde_json::from_value(value).map_err(|e| SnapshotError::Corrupt(e.to_string()))?;
    if doc.memories.dimension() != doc.settings.embedding_dimension {
        return Err(SnapshotError::Corrupt(format!(
            "memory dimension {} does not match settings {}",
            doc.memories.dimension(),
            doc.settings.embedding_dimension
        )));
    }
    Ok(SimState {
        tick: doc.tick,
        seed: doc.seed,
        rng_counter: doc.rng_counter,
        config: doc.world.config,
        map: doc.world.map,
        agents: doc.agents.into_iter().map(|a| (a.id, a)).collect(),
        next_agent_id: doc.next_agent_id,
        memories: doc.memories,
        skills: doc.skills,
        pending: doc.pending_commands,
        event_count: doc.event_count,
        settings: doc.settings,
    })
}
