use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agent::AgentId;
use crate::geom::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Agent(AgentId),
    System,
    Mayor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Move,
    Say,
    Use,
    Feedback,
    Purchase,
    Salary,
    PlanStep,
    AgentCreated,
    BuildingPlaced,
    MayorSay,
    EpisodeEnd,
    Idle,
    GiveUp,
    BackendError,
    CommandRejected,
    Heartbeat,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Move => "move",
            EventKind::Say => "say",
            EventKind::Use => "use",
            EventKind::Feedback => "feedback",
            EventKind::Purchase => "purchase",
            EventKind::Salary => "salary",
            EventKind::PlanStep => "plan_step",
            EventKind::AgentCreated => "agent_created",
            EventKind::BuildingPlaced => "building_placed",
            EventKind::MayorSay => "mayor_say",
            EventKind::EpisodeEnd => "episode_end",
            EventKind::Idle => "idle",
            EventKind::GiveUp => "give_up",
            EventKind::BackendError => "backend_error",
            EventKind::CommandRejected => "command_rejected",
            EventKind::Heartbeat => "heartbeat",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: Tick,
    /// Global sequence number, strictly increasing across the whole run.
    pub seq: u64,
    pub actor: Actor,
    pub kind: EventKind,
    pub payload: Value,
}

impl Event {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }

    /// The id carried by an `agent_created` payload.
    pub fn agent_created_id(&self) -> Option<AgentId> {
        self.payload
            .get("agent")
            .and_then(Value::as_u64)
            .and_then(|v| u32::try_from(v).ok())
            .map(AgentId)
    }

    pub fn agent(&self) -> Option<AgentId> {
        match self.actor {
            Actor::Agent(id) => Some(id),
            _ => None,
        }
    }
}

/// Stamps events with the tick and the next sequence number.
pub(crate) struct Emitter {
    tick: Tick,
    next_seq: u64,
    out: Vec<Event>,
}

impl Emitter {
    pub(crate) fn new(tick: Tick, next_seq: u64) -> Self {
        Self { tick, next_seq, out: Vec::new() }
    }

    pub(crate) fn emit(&mut self, actor: Actor, kind: EventKind, payload: Value) {
        self.out.push(Event {
            tick: self.tick,
            seq: self.next_seq,
            actor,
            kind,
            payload,
        });
        self.next_seq += 1;
    }

    pub(crate) fn tick(&self) -> Tick {
        self.tick
    }

    pub(crate) fn finish(self) -> (Vec<Event>, u64) {
        (self.out, self.next_seq)
    }
}

/// Serialize events as one JSON document per line.
pub fn to_jsonl(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_json());
        out.push('\n');
    }
    out
}

pub fn write_jsonl(events: &[Event], mut w: impl Write) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Parse a JSONL log; blank lines are skipped. Errors carry the 1-based line.
pub fn read_jsonl(r: impl BufRead) -> Result<Vec<Event>, (usize, String)> {
    let mut events = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| (i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| (i + 1, e.to_string()))?);
    }
    Ok(events)
}
