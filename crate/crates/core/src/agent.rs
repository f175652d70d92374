//! Agent profiles and state, the per-tick decision step, and cash
//! transactions.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, BackendRegistry, Embedder, LlmCaller};
use crate::geom::{Cash, Cell, Tick};
use crate::memory::{MemoryError, MemoryStore};
use crate::planning::{
    next_action, Observation, Plan, PlanContext, PlanError, PlanStatus, PlanningSystem, Verdict,
};
use crate::systems::{SystemsRegistry, BASELINE_PLANNER, VECTOR_MEMORY};
use crate::tools::{propose_operation, Proposal, SkillStore, ToolError};
use crate::world::{EconomyDef, WorldConfig, WorldMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn default_memory() -> String {
    VECTOR_MEMORY.to_string()
}

fn default_planner() -> String {
    BASELINE_PLANNER.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub name: String,
    #[serde(default)]
    pub bio: String,
    #[serde(default)]
    pub goal: String,
    #[serde(alias = "model", alias = "backend")]
    pub backend_id: String,
    #[serde(default = "default_memory", alias = "memorySystem", alias = "memory_system")]
    pub memory_system_id: String,
    #[serde(default = "default_planner", alias = "planSystem", alias = "plan_system")]
    pub plan_system_id: String,
    /// Building ids the agent owns. A label only: ownership moves no cash.
    #[serde(default, alias = "buildings")]
    pub owned_buildings: Vec<u32>,
    #[serde(default, alias = "cash")]
    pub starting_cash: Cash,
}

impl AgentProfile {
    pub fn new(name: impl Into<String>, backend_id: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            bio: String::new(),
            goal: String::new(),
            backend_id: backend_id.into(),
            memory_system_id: default_memory(),
            plan_system_id: default_planner(),
            owned_buildings: Vec::new(),
            starting_cash: 0,
        }
    }

    pub fn with_goal(mut self, goal: impl Into<String>) -> Self {
        self.goal = goal.into();
        self
    }

    pub fn with_cash(mut self, cash: Cash) -> Self {
        self.starting_cash = cash;
        self
    }
}

/// The other side of a conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Peer {
    Agent(AgentId),
    Mayor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum AgentStatus {
    Idle,
    Moving { target: Cell },
    Conversing { peer: Peer },
    Using { equipment_id: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionKind {
    /// `en_route` moves approach a target for another action and do not
    /// complete the subtask on arrival.
    Move { target: Cell, en_route: bool },
    Say { peer: AgentId, utterance: String },
    Use { equipment_id: u32, cell: Cell, purpose: String, operation: String },
    /// Found a building (mayor only).
    Build { building_id: u32, origin: Cell },
    Idle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentAction {
    pub kind: ActionKind,
    pub issued_tick: Tick,
}

impl AgentAction {
    pub fn idle(tick: Tick) -> Self {
        Self {
            kind: ActionKind::Idle,
            issued_tick: tick,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub profile: AgentProfile,
    pub location: Cell,
    pub cash: Cash,
    pub plan: Option<Plan>,
    pub status: AgentStatus,
    /// Acts as the town's mayor: may found buildings and talk to anyone.
    #[serde(default)]
    pub mayor: bool,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AgentError {
    #[error("agent name is empty")]
    EmptyName,
    #[error("an agent named {0:?} already exists")]
    DuplicateName(String),
    #[error("unknown backend {0:?}")]
    UnknownBackend(String),
    #[error("unknown {kind} system {id:?}")]
    UnknownSystem { kind: &'static str, id: String },
    #[error("cannot spawn at {cell}: {reason}")]
    InvalidSpawn { cell: Cell, reason: &'static str },
    #[error("{item} costs {price} but only {cash} is available")]
    InsufficientCash { item: String, price: Cash, cash: Cash },
    #[error("{0:?} is not on the menu")]
    UnknownItem(String),
}

/// Check a new agent against the live population and registries.
pub fn validate_profile<'n>(
    profile: &AgentProfile,
    spawn: Cell,
    existing_names: impl IntoIterator<Item = &'n str>,
    backends: &BackendRegistry,
    systems: &SystemsRegistry,
    map: &WorldMap,
) -> Result<(), AgentError> {
    if profile.name.trim().is_empty() {
        return Err(AgentError::EmptyName);
    }
    if existing_names.into_iter().any(|n| n == profile.name) {
        return Err(AgentError::DuplicateName(profile.name.clone()));
    }
    if !backends.contains(&profile.backend_id) {
        return Err(AgentError::UnknownBackend(profile.backend_id.clone()));
    }
    if systems.planner(&profile.plan_system_id).is_none() {
        return Err(AgentError::UnknownSystem {
            kind: "planning",
            id: profile.plan_system_id.clone(),
        });
    }
    if systems.memory(&profile.memory_system_id).is_none() {
        return Err(AgentError::UnknownSystem {
            kind: "memory",
            id: profile.memory_system_id.clone(),
        });
    }
    if !map.in_bounds(spawn) {
        return Err(AgentError::InvalidSpawn { cell: spawn, reason: "out of bounds" });
    }
    if map.is_blocked(spawn) {
        return Err(AgentError::InvalidSpawn { cell: spawn, reason: "inside a building" });
    }
    Ok(())
}

/// Validate and build a live agent: idle, no plan, starting cash.
pub fn create_agent<'n>(
    id: AgentId,
    profile: AgentProfile,
    spawn: Cell,
    existing_names: impl IntoIterator<Item = &'n str>,
    backends: &BackendRegistry,
    systems: &SystemsRegistry,
    map: &WorldMap,
) -> Result<AgentState, AgentError> {
    validate_profile(&profile, spawn, existing_names, backends, systems, map)?;
    Ok(AgentState::new(id, profile, spawn))
}

impl AgentState {
    pub fn new(id: AgentId, profile: AgentProfile, spawn: Cell) -> Self {
        Self {
            id,
            cash: profile.starting_cash,
            profile,
            location: spawn,
            plan: None,
            status: AgentStatus::Idle,
            mayor: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.profile.name
    }

    /// Pay the menu price for `item`. All or nothing; returns the price.
    pub fn purchase(&mut self, item: &str, economy: &EconomyDef) -> Result<Cash, AgentError> {
        let price = economy
            .price_of(item)
            .ok_or_else(|| AgentError::UnknownItem(item.to_string()))?;
        if self.cash < price {
            return Err(AgentError::InsufficientCash {
                item: item.to_string(),
                price,
                cash: self.cash,
            });
        }
        self.cash -= price;
        Ok(price)
    }

    /// Credit one shift's salary; returns the amount.
    pub fn earn_salary(&mut self, economy: &EconomyDef) -> Cash {
        self.cash = self.cash.saturating_add(economy.salary);
        economy.salary
    }
}

/// Planning milestones reported by a step, logged by the engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum PlanNote {
    Created { subtasks: Vec<String> },
    Achieved,
    Replan,
    Stuck,
    Failed { reason: String },
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error("agent {agent}: {source}")]
    Backend { agent: AgentId, source: BackendError },
    #[error("agent {agent}: {source}")]
    Memory { agent: AgentId, source: MemoryError },
}

/// Read-only inputs to one agent decision.
pub struct StepInput<'a> {
    pub observation: &'a Observation,
    pub config: &'a WorldConfig,
    pub planner: &'a dyn PlanningSystem,
    /// Memories recalled per decision; 0 disables retrieval.
    pub recall_k: usize,
    pub memory: &'a MemoryStore,
    pub skills: &'a SkillStore,
    pub embedder: &'a dyn Embedder,
    pub caller: LlmCaller<'a>,
    pub tick: Tick,
    pub tie_break: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub action: AgentAction,
    /// The tool-use proposal behind a `Use` action.
    pub proposal: Option<Proposal>,
    pub notes: Vec<PlanNote>,
}

impl Step {
    fn idle(tick: Tick, notes: Vec<PlanNote>) -> Self {
        Self {
            action: AgentAction::idle(tick),
            proposal: None,
            notes,
        }
    }
}

fn recall(agent: &AgentState, query: &str, input: &StepInput<'_>) -> Result<Vec<(Tick, String)>, StepError> {
    if input.recall_k == 0 || query.trim().is_empty() {
        return Ok(Vec::new());
    }
    let hits = input
        .memory
        .retrieve(agent.id, query, input.recall_k, input.embedder)
        .map_err(|source| StepError::Memory { agent: agent.id, source })?;
    Ok(hits
        .into_iter()
        .map(|r| (r.record.tick, r.record.text.clone()))
        .collect())
}

/// Choose this tick's action. Plans are created (or recreated after going
/// stuck) on demand; a replan verdict drops the plan and idles. Pure with
/// respect to its inputs under a deterministic backend.
pub fn step_agent(agent: &mut AgentState, input: &StepInput<'_>) -> Result<Step, StepError> {
    let tick = input.tick;
    let goal = agent.profile.goal.clone();
    let id = agent.id;
    let backend_err = move |source| StepError::Backend { agent: id, source };
    if goal.trim().is_empty() {
        return Ok(Step::idle(tick, Vec::new()));
    }
    let mut notes = Vec::new();

    if agent.plan.as_ref().is_none_or(|p| p.status == PlanStatus::Stuck) {
        let memories = recall(agent, &goal, input)?;
        let ctx = PlanContext {
            name: &agent.profile.name,
            bio: &agent.profile.bio,
            goal: &goal,
            status: &agent.status,
            plan: None,
            memories,
            observation: input.observation,
            tick,
            tie_break: input.tie_break,
        };
        match input.planner.make_plan(&goal, &ctx, &input.caller) {
            Ok(plan) => {
                notes.push(PlanNote::Created { subtasks: plan.subtasks.clone() });
                agent.plan = Some(plan);
            }
            Err(PlanError::Backend(e)) => return Err(backend_err(e)),
            Err(e) => {
                agent.plan = None;
                notes.push(PlanNote::Failed { reason: e.to_string() });
                return Ok(Step::idle(tick, notes));
            }
        }
    }

    let mut plan = agent.plan.clone().expect("plan present");
    if plan.status == PlanStatus::Achieved {
        return Ok(Step::idle(tick, notes));
    }
    let memories = recall(agent, plan.current().unwrap_or(&goal), input)?;
    let snapshot = plan.clone();
    let ctx = PlanContext {
        name: &agent.profile.name,
        bio: &agent.profile.bio,
        goal: &goal,
        status: &agent.status,
        plan: Some(&snapshot),
        memories,
        observation: input.observation,
        tick,
        tie_break: input.tie_break,
    };

    match input.planner.assess(&mut plan, &ctx, &input.caller) {
        Ok(Verdict::Continue) => {}
        Ok(Verdict::Achieved) => {
            agent.plan = Some(plan);
            notes.push(PlanNote::Achieved);
            return Ok(Step::idle(tick, notes));
        }
        Ok(Verdict::Replan) => {
            agent.plan = None;
            notes.push(PlanNote::Replan);
            return Ok(Step::idle(tick, notes));
        }
        Err(PlanError::Backend(e)) => return Err(backend_err(e)),
        Err(e) => {
            plan.note_failure();
            if plan.status == PlanStatus::Stuck {
                notes.push(PlanNote::Stuck);
            }
            notes.push(PlanNote::Failed { reason: e.to_string() });
            agent.plan = Some(plan);
            return Ok(Step::idle(tick, notes));
        }
    }

    let action = next_action(input.planner, &mut plan, &ctx, &input.caller).map_err(backend_err)?;
    if plan.status == PlanStatus::Stuck {
        notes.push(PlanNote::Stuck);
    }
    agent.plan = Some(plan);

    let ActionKind::Use { equipment_id, cell, purpose, .. } = action.kind.clone() else {
        return Ok(Step { action, proposal: None, notes });
    };
    let Some(equipment) = input.config.equipment.get(&equipment_id) else {
        return Ok(Step::idle(tick, notes));
    };
    match propose_operation(&agent.profile.name, equipment, &purpose, input.skills, &[], &input.caller) {
        Ok(proposal) => Ok(Step {
            action: AgentAction {
                kind: ActionKind::Use {
                    equipment_id,
                    cell,
                    purpose,
                    operation: proposal.operation.clone(),
                },
                issued_tick: tick,
            },
            proposal: Some(proposal),
            notes,
        }),
        Err(ToolError::Backend(e)) => Err(backend_err(e)),
        Err(e) => {
            notes.push(PlanNote::Failed { reason: e.to_string() });
            Ok(Step::idle(tick, notes))
        }
    }
}

#[cfg(test)]
mod tests;
