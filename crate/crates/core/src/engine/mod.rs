//! The deterministic tick loop: command application, agent steps, world
//! mutation, conversations, the event log and snapshots.

mod commands;
mod converse;
mod events;
mod movement;
pub mod rng;
mod snapshot;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub use commands::{Command, ScheduledCommand};
pub use converse::{Conversation, ConversationEnd, Turn, DEFAULT_MAX_TURNS};
pub use events::{read_jsonl, to_jsonl, write_jsonl, Actor, Event, EventKind};
pub use movement::{arrived, step_toward};
pub use snapshot::{load_snapshot, save_snapshot, SnapshotError, SNAPSHOT_VERSION};

use converse::{run_conversation, Side, Speaker};
use events::Emitter;

use crate::agent::{
    create_agent, step_agent, validate_profile, ActionKind, AgentError, AgentId, AgentState, AgentStatus,
    Peer, StepError, StepInput,
};
use crate::backend::{BackendRegistry, CallLog, CompletionBackend, Embedder, HashingEmbedder, LlmCaller, DEFAULT_DIMENSION};
use crate::geom::{Cell, Tick};
use crate::memory::MemoryStore;
use crate::planning::{advance, Observation, PlanStatus, SeenAgent, SeenBuilding, SeenEquipment};
use crate::systems::SystemsRegistry;
use crate::tools::{use_equipment, SkillStore, UseRequest, DEFAULT_RETRIES};
use crate::world::{PlacementError, WorldConfig, WorldMap};

fn default_ticks_per_day() -> u64 {
    24
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineSettings {
    pub max_turns: u32,
    /// Refinement retries per equipment use.
    pub retries: u32,
    /// Only used to label heartbeats with a day number.
    #[serde(default = "default_ticks_per_day")]
    pub ticks_per_day: u64,
    /// Backend answering model-backed equipment; the acting agent's own
    /// backend when unset.
    #[serde(default)]
    pub support_backend: Option<String>,
    pub embedding_dimension: usize,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            max_turns: DEFAULT_MAX_TURNS,
            retries: DEFAULT_RETRIES,
            ticks_per_day: default_ticks_per_day(),
            support_backend: None,
            embedding_dimension: DEFAULT_DIMENSION,
        }
    }
}

/// Everything that determines future behavior, apart from the backends.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// Last completed tick; 0 before the first.
    pub tick: Tick,
    pub seed: u64,
    pub rng_counter: u64,
    pub config: WorldConfig,
    pub map: WorldMap,
    pub agents: BTreeMap<AgentId, AgentState>,
    pub next_agent_id: u32,
    pub memories: MemoryStore,
    pub skills: BTreeMap<AgentId, SkillStore>,
    /// Queued commands in arrival order.
    pub pending: Vec<ScheduledCommand>,
    /// Events emitted so far; the next event's seq.
    pub event_count: u64,
    pub settings: EngineSettings,
}

impl SimState {
    pub fn new(config: WorldConfig, map: WorldMap, seed: u64, settings: EngineSettings) -> Self {
        Self {
            tick: 0,
            seed,
            rng_counter: 0,
            config,
            map,
            agents: BTreeMap::new(),
            next_agent_id: 1,
            memories: MemoryStore::new(settings.embedding_dimension),
            skills: BTreeMap::new(),
            pending: Vec::new(),
            event_count: 0,
            settings,
        }
    }

    pub fn agent_named(&self, name: &str) -> Option<&AgentState> {
        self.agents.values().find(|a| a.profile.name == name)
    }

    pub fn skills_for(&self, id: AgentId) -> Option<&SkillStore> {
        self.skills.get(&id)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CommandError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error("unknown building id {0}")]
    UnknownBuilding(u32),
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("mayor message is empty")]
    EmptyMessage,
}

/// Runs ticks against a [`SimState`]. Holds the collaborators that are not
/// part of the state: backends, system variants, the embedder and the call
/// log.
#[derive(Clone)]
pub struct Engine {
    backends: Arc<BackendRegistry>,
    systems: Arc<SystemsRegistry>,
    embedder: Arc<dyn Embedder>,
    calls: CallLog,
}

impl Engine {
    pub fn new(backends: Arc<BackendRegistry>) -> Self {
        Self {
            backends,
            systems: Arc::new(SystemsRegistry::standard()),
            embedder: Arc::new(HashingEmbedder::new(DEFAULT_DIMENSION)),
            calls: CallLog::new(),
        }
    }

    pub fn with_systems(mut self, systems: Arc<SystemsRegistry>) -> Self {
        self.systems = systems;
        self
    }

    pub fn with_embedder(mut self, embedder: Arc<dyn Embedder>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn with_call_log(mut self, calls: CallLog) -> Self {
        self.calls = calls;
        self
    }

    pub fn calls(&self) -> &CallLog {
        &self.calls
    }

    pub fn backends(&self) -> &BackendRegistry {
        &self.backends
    }

    pub fn systems(&self) -> &SystemsRegistry {
        &self.systems
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    /// Check a command against the current state without applying it.
    pub fn validate_command(&self, state: &SimState, command: &Command) -> Result<(), CommandError> {
        match command {
            Command::CreateAgent { profile, spawn, .. } => validate_profile(
                profile,
                *spawn,
                state.agents.values().map(|a| a.profile.name.as_str()),
                &self.backends,
                &self.systems,
                &state.map,
            )
            .map_err(Into::into),
            Command::CreateBuilding { building_id, origin } => {
                let def = state
                    .config
                    .buildings
                    .get(building_id)
                    .ok_or(CommandError::UnknownBuilding(*building_id))?;
                state.map.check_placement(def, *origin).map_err(Into::into)
            }
            Command::MayorSay { target_agent, text } => {
                if !state.agents.contains_key(target_agent) {
                    return Err(CommandError::UnknownAgent(*target_agent));
                }
                if text.trim().is_empty() {
                    return Err(CommandError::EmptyMessage);
                }
                Ok(())
            }
        }
    }

    /// Queue a command for the next tick; returns that tick.
    pub fn schedule(&self, state: &mut SimState, command: Command) -> Tick {
        let applies_at_tick = state.tick + 1;
        state.pending.push(ScheduledCommand { applies_at_tick, command });
        applies_at_tick
    }

    /// Queue a command for an explicit tick (schedule replay).
    pub fn schedule_at(&self, state: &mut SimState, applies_at_tick: Tick, command: Command) {
        state.pending.push(ScheduledCommand { applies_at_tick, command });
    }

    /// Apply a command immediately, stamped with the current tick. Used to
    /// set up a world before the first tick.
    pub fn apply_now(&self, state: &mut SimState, command: Command) -> Vec<Event> {
        let mut em = Emitter::new(state.tick, state.event_count);
        self.apply_command(state, command, &mut em);
        let (events, next) = em.finish();
        state.event_count = next;
        events
    }

    /// Execute tick `state.tick + 1`: queued commands due by then in arrival
    /// order, then every agent in ascending id order, then a heartbeat.
    pub fn tick(&self, state: &mut SimState) -> Vec<Event> {
        let exec = state.tick + 1;
        let mut em = Emitter::new(exec, state.event_count);

        let (due, later): (Vec<_>, Vec<_>) = std::mem::take(&mut state.pending)
            .into_iter()
            .partition(|c| c.applies_at_tick <= exec);
        state.pending = later;
        for sc in due {
            self.apply_command(state, sc.command, &mut em);
        }

        let ids: Vec<AgentId> = state.agents.keys().copied().collect();
        for id in ids {
            self.act(state, id, &mut em);
        }

        em.emit(
            Actor::System,
            EventKind::Heartbeat,
            json!({
                "agents": state.agents.len(),
                "day": exec / state.settings.ticks_per_day.max(1),
            }),
        );
        let (events, next) = em.finish();
        state.event_count = next;
        state.tick = exec;
        events
    }

    /// Tick up to `n_ticks` times, stopping early once `stop` holds after a
    /// tick. Returns the events of the ticks run.
    pub fn run(
        &self,
        state: &mut SimState,
        n_ticks: u64,
        mut stop: impl FnMut(&SimState, &[Event]) -> bool,
    ) -> Vec<Event> {
        let mut log = Vec::new();
        for _ in 0..n_ticks {
            let events = self.tick(state);
            log.extend(events);
            if stop(state, &log) {
                break;
            }
        }
        log
    }

    /// Append an end-of-episode marker at the current tick.
    pub fn end_episode(&self, state: &mut SimState, payload: Value) -> Event {
        let mut em = Emitter::new(state.tick, state.event_count);
        em.emit(Actor::System, EventKind::EpisodeEnd, payload);
        let (mut events, next) = em.finish();
        state.event_count = next;
        events.pop().expect("one event")
    }

    fn apply_command(&self, state: &mut SimState, command: Command, em: &mut Emitter) {
        let name = command.name();
        let result = match command {
            Command::CreateAgent { profile, spawn, mayor } => self.create(state, profile, spawn, mayor, em),
            Command::CreateBuilding { building_id, origin } => {
                self.place(state, Actor::System, building_id, origin, em).map(|_| ())
            }
            Command::MayorSay { target_agent, text } => self.mayor_say(state, target_agent, &text, em),
        };
        if let Err(e) = result {
            em.emit(
                Actor::System,
                EventKind::CommandRejected,
                json!({"command": name, "reason": e.to_string()}),
            );
        }
    }

    fn create(
        &self,
        state: &mut SimState,
        profile: crate::agent::AgentProfile,
        spawn: Cell,
        mayor: bool,
        em: &mut Emitter,
    ) -> Result<(), CommandError> {
        let id = AgentId(state.next_agent_id);
        let mut agent = create_agent(
            id,
            profile,
            spawn,
            state.agents.values().map(|a| a.profile.name.as_str()),
            &self.backends,
            &self.systems,
            &state.map,
        )?;
        agent.mayor = mayor;
        state.next_agent_id += 1;
        em.emit(
            Actor::System,
            EventKind::AgentCreated,
            json!({
                "agent": id,
                "name": agent.profile.name,
                "spawn": spawn,
                "cash": agent.cash,
                "goal": agent.profile.goal,
                "backend": agent.profile.backend_id,
                "plan_system": agent.profile.plan_system_id,
                "memory_system": agent.profile.memory_system_id,
                "mayor": mayor,
            }),
        );
        state.skills.insert(id, SkillStore::new());
        state.agents.insert(id, agent);
        Ok(())
    }

    fn place(
        &self,
        state: &mut SimState,
        actor: Actor,
        building_id: u32,
        origin: Cell,
        em: &mut Emitter,
    ) -> Result<usize, CommandError> {
        let def = state
            .config
            .buildings
            .get(&building_id)
            .ok_or(CommandError::UnknownBuilding(building_id))?;
        let index = state.map.place_building(def, origin)?;
        em.emit(
            actor,
            EventKind::BuildingPlaced,
            json!({
                "building_id": building_id,
                "kind": def.kind,
                "assets": def.assets,
                "origin": origin,
                "placement": index,
            }),
        );
        Ok(index)
    }

    fn recall(&self, state: &SimState, agent: &AgentState, query: &str) -> Vec<(Tick, String)> {
        let k = self
            .systems
            .memory(&agent.profile.memory_system_id)
            .map_or(0, |m| m.recall_k);
        if k == 0 {
            return Vec::new();
        }
        state
            .memories
            .retrieve(agent.id, query, k, self.embedder.as_ref())
            .map(|hits| hits.into_iter().map(|r| (r.record.tick, r.record.text.clone())).collect())
            .unwrap_or_default()
    }

    fn remember(&self, state: &mut SimState, id: AgentId, text: &str, tick: Tick) {
        if let Err(e) = state.memories.store(id, text, tick, self.embedder.as_ref()) {
            log::warn!("agent {id}: memory write failed: {e}");
        }
    }

    fn caller<'a>(&'a self, backend_id: &'a str, tick: Tick, agent: AgentId) -> Option<LlmCaller<'a>> {
        let backend: &dyn CompletionBackend = self.backends.get(backend_id).ok()?.as_ref();
        Some(LlmCaller {
            backend_id,
            backend,
            log: &self.calls,
            tick,
            agent: Some(agent),
        })
    }

    fn mayor_say(&self, state: &mut SimState, target: AgentId, text: &str, em: &mut Emitter) -> Result<(), CommandError> {
        if text.trim().is_empty() {
            return Err(CommandError::EmptyMessage);
        }
        let agent = state.agents.get(&target).ok_or(CommandError::UnknownAgent(target))?.clone();
        let tick = em.tick();
        em.emit(Actor::Mayor, EventKind::MayorSay, json!({"to": target, "utterance": text}));
        let speaker = self.caller(&agent.profile.backend_id, tick, target).map(|caller| Speaker {
            profile: &agent.profile,
            caller,
            memories: self.recall(state, &agent, "Mayor"),
        });
        let mayor = Side { peer: Peer::Mayor, name: "Mayor", speaker: None };
        let side = Side { peer: Peer::Agent(target), name: &agent.profile.name, speaker: speaker.as_ref() };
        let mut errors = Vec::new();
        let convo = run_conversation(&mayor, &side, text, 2.min(state.settings.max_turns.max(1)), &mut |e| {
            errors.push(e.to_string())
        });
        self.remember(state, target, &format!("Mayor said to {}: {text}", agent.profile.name), tick);
        for (i, turn) in convo.turns.iter().enumerate().skip(1) {
            em.emit(
                Actor::Agent(target),
                EventKind::Say,
                json!({"to": Peer::Mayor, "utterance": turn.utterance, "turn": i + 1}),
            );
            self.remember(
                state,
                target,
                &format!("{} said to Mayor: {}", agent.profile.name, turn.utterance),
                tick,
            );
        }
        for message in errors {
            em.emit(Actor::Agent(target), EventKind::BackendError, json!({"message": message}));
        }
        if let Some(a) = state.agents.get_mut(&target) {
            a.status = AgentStatus::Conversing { peer: Peer::Mayor };
        }
        Ok(())
    }

    fn observe(&self, state: &SimState, agent: &AgentState) -> Observation {
        let equipment = state
            .map
            .equipment()
            .filter_map(|inst| {
                let def = state.config.equipment.get(&inst.equipment_id)?;
                Some(SeenEquipment {
                    equipment_id: inst.equipment_id,
                    kind: def.kind.clone(),
                    description: def.description.clone(),
                    building_id: inst.building_id,
                    cell: inst.cell,
                })
            })
            .collect();
        let buildings = state
            .map
            .placements()
            .iter()
            .map(|p| {
                let eq: Vec<Cell> = p.cells.iter().filter(|o| o.equipment_id.is_some()).map(|o| o.cell).collect();
                SeenBuilding {
                    building_id: p.building_id,
                    kind: p.kind.clone(),
                    origin: p.origin,
                    targets: if eq.is_empty() { p.cells.iter().map(|o| o.cell).collect() } else { eq },
                }
            })
            .collect();
        let agents = state
            .agents
            .values()
            .filter(|a| a.id != agent.id)
            .map(|a| SeenAgent { id: a.id, name: a.profile.name.clone(), location: a.location })
            .collect();
        let buildable = if agent.mayor {
            state.config.buildings.values().map(|b| (b.id, b.kind.clone())).collect()
        } else {
            Vec::new()
        };
        Observation {
            position: agent.location,
            cash: agent.cash,
            equipment,
            buildings,
            agents,
            buildable,
            mayor: agent.mayor,
        }
    }

    fn act(&self, state: &mut SimState, id: AgentId, em: &mut Emitter) {
        let tick = em.tick();
        let tie_break = rng::draw(state.seed, state.rng_counter);
        state.rng_counter += 1;
        let Some(mut agent) = state.agents.get(&id).cloned() else {
            return;
        };
        let actor = Actor::Agent(id);
        let idle = |em: &mut Emitter, payload: Value| em.emit(actor, EventKind::Idle, payload);

        let backend_id = agent.profile.backend_id.clone();
        let Some(caller) = self.caller(&backend_id, tick, id) else {
            em.emit(
                actor,
                EventKind::BackendError,
                json!({"message": format!("unknown backend {:?}", agent.profile.backend_id)}),
            );
            idle(em, json!({}));
            return;
        };
        let (Some(planner), Some(memory)) = (
            self.systems.planner(&agent.profile.plan_system_id).cloned(),
            self.systems.memory(&agent.profile.memory_system_id),
        ) else {
            idle(em, json!({"reason": "unknown system variant"}));
            return;
        };

        let observation = self.observe(state, &agent);
        let empty = SkillStore::new();
        let step = {
            let input = StepInput {
                observation: &observation,
                config: &state.config,
                planner: planner.as_ref(),
                recall_k: memory.recall_k,
                memory: &state.memories,
                skills: state.skills.get(&id).unwrap_or(&empty),
                embedder: self.embedder.as_ref(),
                caller,
                tick,
                tie_break,
            };
            step_agent(&mut agent, &input)
        };
        let step = match step {
            Ok(step) => step,
            Err(e) => {
                let kind = match e {
                    StepError::Backend { .. } => EventKind::BackendError,
                    StepError::Memory { .. } => EventKind::Idle,
                };
                em.emit(actor, kind, json!({"message": e.to_string()}));
                if kind == EventKind::BackendError {
                    idle(em, json!({}));
                }
                agent.status = AgentStatus::Idle;
                state.agents.insert(id, agent);
                return;
            }
        };
        for note in &step.notes {
            let payload = serde_json::to_value(note).expect("notes serialize");
            em.emit(actor, EventKind::PlanStep, payload);
        }

        let completed = match step.action.kind.clone() {
            ActionKind::Idle => {
                idle(em, json!({}));
                agent.status = AgentStatus::Idle;
                false
            }
            ActionKind::Move { target, en_route } => {
                let from = agent.location;
                let to = step_toward(&state.map, from, target);
                let done = arrived(&state.map, to, target);
                agent.location = to;
                agent.status = if done { AgentStatus::Idle } else { AgentStatus::Moving { target } };
                em.emit(
                    actor,
                    EventKind::Move,
                    json!({"from": from, "to": to, "target": target, "arrived": done}),
                );
                done && !en_route
            }
            ActionKind::Say { peer, utterance } => {
                let done = self.converse(state, &agent, peer, &utterance, em);
                agent.status = AgentStatus::Conversing { peer: Peer::Agent(peer) };
                done
            }
            ActionKind::Use { equipment_id, cell, purpose, .. } => {
                self.use_at(state, &mut agent, equipment_id, cell, &purpose, step.proposal, caller, em)
            }
            ActionKind::Build { building_id, origin } => match self.place(state, actor, building_id, origin, em) {
                Ok(_) => true,
                Err(e) => {
                    idle(em, json!({"reason": e.to_string()}));
                    if let Some(plan) = agent.plan.as_mut() {
                        plan.note_failure();
                    }
                    false
                }
            },
        };

        if completed {
            if let Some(plan) = agent.plan.as_mut() {
                let subtask = plan.current().unwrap_or_default().to_string();
                match advance(plan, id, &mut state.memories, tick, self.embedder.as_ref()) {
                    Ok(true) => {
                        em.emit(
                            actor,
                            EventKind::PlanStep,
                            json!({"phase": "completed", "subtask": subtask, "cursor": plan.cursor}),
                        );
                        if plan.status == PlanStatus::Achieved {
                            em.emit(actor, EventKind::PlanStep, json!({"phase": "achieved"}));
                        }
                    }
                    Ok(false) => {}
                    Err(e) => log::warn!("agent {id}: could not record progress: {e}"),
                }
            }
        }
        state.agents.insert(id, agent);
    }
}

impl Engine {
    fn speaker<'a>(&'a self, state: &SimState, who: &'a AgentState, partner: &str, tick: Tick) -> Option<Speaker<'a>> {
        self.caller(&who.profile.backend_id, tick, who.id).map(|caller| Speaker {
            profile: &who.profile,
            caller,
            memories: self.recall(state, who, partner),
        })
    }

    /// An agent-initiated conversation, run to completion within the tick.
    fn converse(&self, state: &mut SimState, agent: &AgentState, peer: AgentId, opener: &str, em: &mut Emitter) -> bool {
        let tick = em.tick();
        let Some(other) = state.agents.get(&peer).cloned() else {
            em.emit(Actor::Agent(agent.id), EventKind::Idle, json!({"reason": format!("unknown agent {peer}")}));
            return false;
        };
        let sa = self.speaker(state, agent, &other.profile.name, tick);
        let sb = self.speaker(state, &other, &agent.profile.name, tick);
        let a = Side { peer: Peer::Agent(agent.id), name: &agent.profile.name, speaker: sa.as_ref() };
        let b = Side { peer: Peer::Agent(peer), name: &other.profile.name, speaker: sb.as_ref() };
        let mut errors = Vec::new();
        let convo = run_conversation(&a, &b, opener, state.settings.max_turns.max(1), &mut |e| {
            errors.push(e.to_string())
        });

        for (i, turn) in convo.turns.iter().enumerate() {
            let (from, to) = if turn.speaker == Peer::Agent(agent.id) { (agent, &other) } else { (&other, agent) };
            em.emit(
                Actor::Agent(from.id),
                EventKind::Say,
                json!({"to": Peer::Agent(to.id), "utterance": turn.utterance, "turn": i + 1}),
            );
            let text = format!("{} said to {}: {}", from.profile.name, to.profile.name, turn.utterance);
            self.remember(state, from.id, &text, tick);
            self.remember(state, to.id, &text, tick);
        }
        for message in errors {
            em.emit(Actor::Agent(agent.id), EventKind::BackendError, json!({"message": message}));
        }
        if let Some(o) = state.agents.get_mut(&peer) {
            o.status = AgentStatus::Conversing { peer: Peer::Agent(agent.id) };
        }
        true
    }

    /// Equipment use with refinement retries and economy effects. Returns
    /// whether the use succeeded.
    #[allow(clippy::too_many_arguments)]
    fn use_at(
        &self,
        state: &mut SimState,
        agent: &mut AgentState,
        equipment_id: u32,
        cell: Cell,
        purpose: &str,
        first: Option<crate::tools::Proposal>,
        inference: LlmCaller<'_>,
        em: &mut Emitter,
    ) -> bool {
        let tick = em.tick();
        let actor = Actor::Agent(agent.id);
        let Some(equipment) = state.config.equipment.get(&equipment_id).cloned() else {
            em.emit(actor, EventKind::Idle, json!({"reason": format!("unknown equipment {equipment_id}")}));
            return false;
        };
        let economy = state.config.economy.get(&equipment_id).cloned();
        let support_id = state
            .settings
            .support_backend
            .clone()
            .unwrap_or_else(|| agent.profile.backend_id.clone());
        let Some(support) = self.caller(&support_id, tick, agent.id) else {
            em.emit(actor, EventKind::BackendError, json!({"message": format!("unknown backend {support_id:?}")}));
            return false;
        };
        agent.status = AgentStatus::Using { equipment_id };
        let skills = state.skills.entry(agent.id).or_default();
        let request = UseRequest {
            equipment: &equipment,
            cell,
            purpose,
            first,
            economy: economy.as_ref(),
            retries: state.settings.retries,
            tick,
        };
        let report = match use_equipment(agent, request, skills, &inference, &support) {
            Ok(r) => r,
            Err(e) => {
                let kind = match e {
                    crate::tools::ToolError::Backend(_) => EventKind::BackendError,
                    _ => EventKind::Idle,
                };
                em.emit(actor, kind, json!({"message": e.to_string()}));
                return false;
            }
        };

        let last = report.attempts.len().saturating_sub(1);
        for (i, attempt) in report.attempts.iter().enumerate() {
            em.emit(
                actor,
                EventKind::Use,
                json!({
                    "equipment_id": equipment_id,
                    "kind": equipment.kind,
                    "cell": cell,
                    "purpose": purpose,
                    "operation": attempt.operation,
                    "attempt": i + 1,
                    "from_skill": attempt.from_skill,
                }),
            );
            em.emit(
                actor,
                EventKind::Feedback,
                json!({
                    "equipment_id": equipment_id,
                    "kind": equipment.kind,
                    "purpose": purpose,
                    "outcome": attempt.feedback.outcome,
                    "success": attempt.feedback.success,
                    "source": attempt.feedback.source,
                    "learned": i == last && report.learned,
                }),
            );
            let text = format!(
                "used {} to {}: \"{}\" -> {}",
                equipment.kind, purpose, attempt.operation, attempt.feedback.outcome
            );
            self.remember(state, agent.id, &text, tick);
        }
        if let Some((item, price)) = &report.purchase {
            em.emit(
                actor,
                EventKind::Purchase,
                json!({"equipment_id": equipment_id, "item": item, "price": price, "cash_after": agent.cash}),
            );
        }
        if let Some(amount) = report.salary {
            em.emit(
                actor,
                EventKind::Salary,
                json!({"equipment_id": equipment_id, "amount": amount, "cash_after": agent.cash}),
            );
        }
        if report.gave_up {
            em.emit(
                actor,
                EventKind::GiveUp,
                json!({"equipment_id": equipment_id, "purpose": purpose, "attempts": report.attempts.len()}),
            );
        }
        report.succeeded()
    }
}
