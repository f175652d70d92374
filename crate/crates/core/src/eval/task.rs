use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalError, GoalPredicate};
use crate::agent::AgentProfile;
use crate::engine::ScheduledCommand;
use crate::geom::{Cell, Tick};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Subject,
    #[default]
    Baseline,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectMode {
    #[default]
    Participant,
    Mayor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskAgent {
    #[serde(flatten)]
    pub profile: AgentProfile,
    pub spawn: Cell,
    #[serde(default)]
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementSpec {
    pub building_id: u32,
    pub origin: Cell,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskWorld {
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub placements: Vec<PlacementSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    #[serde(default)]
    pub description: String,
    pub world: TaskWorld,
    pub agents: Vec<TaskAgent>,
    #[serde(default)]
    pub subject_mode: SubjectMode,
    pub goal: GoalPredicate,
    pub tick_budget: Tick,
    pub episodes: u32,
    pub seeds: Vec<u64>,
    /// Commands injected at fixed ticks, as a gateway would.
    #[serde(default)]
    pub commands: Vec<ScheduledCommand>,
    /// Backend for model-backed equipment; defaults to each agent's own.
    #[serde(default)]
    pub support_backend: Option<String>,
    #[serde(default)]
    pub max_turns: Option<u32>,
}

impl TaskSpec {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let task: TaskSpec = serde_json::from_str(text).map_err(|e| EvalError::Task(e.to_string()))?;
        task.validate()?;
        Ok(task)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| EvalError::Task(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let invalid = |m: String| Err(EvalError::Task(m));
        let subjects = self.agents.iter().filter(|a| a.role == Role::Subject).count();
        if subjects != 1 {
            return invalid(format!("expected exactly one subject agent, found {subjects}"));
        }
        if self.tick_budget == 0 {
            return invalid("tick_budget must be positive".into());
        }
        if self.episodes == 0 {
            return invalid("episodes must be positive".into());
        }
        if self.seeds.len() != self.episodes as usize {
            return invalid(format!("{} seeds for {} episodes", self.seeds.len(), self.episodes));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return invalid("seeds must be distinct".into());
        }
        Ok(())
    }

    pub fn subject(&self) -> &TaskAgent {
        self.agents
            .iter()
            .find(|a| a.role == Role::Subject)
            .expect("validated task has a subject")
    }
}
