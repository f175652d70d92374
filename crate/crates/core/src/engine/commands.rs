use serde::{Deserialize, Serialize};

use crate::agent::{AgentId, AgentProfile};
use crate::geom::{Cell, Tick};

/// A world mutation requested from outside the tick loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Command {
    CreateAgent {
        profile: AgentProfile,
        spawn: Cell,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        mayor: bool,
    },
    CreateBuilding {
        building_id: u32,
        origin: Cell,
    },
    MayorSay {
        target_agent: AgentId,
        text: String,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CreateAgent { .. } => "create_agent",
            Command::CreateBuilding { .. } => "create_building",
            Command::MayorSay { .. } => "mayor_say",
        }
    }
}

/// A command together with the tick it takes effect at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledCommand {
    pub applies_at_tick: Tick,
    pub command: Command,
}
