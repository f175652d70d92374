use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::Plan;
use crate::agent::{AgentId, AgentStatus};
use crate::geom::{Cash, Cell, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeenEquipment {
    pub equipment_id: u32,
    pub kind: String,
    pub description: String,
    pub building_id: u32,
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeenBuilding {
    pub building_id: u32,
    pub kind: String,
    pub origin: Cell,
    /// Equipment cells if any, otherwise every occupied cell.
    pub targets: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeenAgent {
    pub id: AgentId,
    pub name: String,
    pub location: Cell,
}

/// What an agent can see of the world when it decides.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub position: Cell,
    pub cash: Cash,
    pub equipment: Vec<SeenEquipment>,
    pub buildings: Vec<SeenBuilding>,
    pub agents: Vec<SeenAgent>,
    /// Building ids that may be founded (mayor only).
    pub buildable: Vec<(u32, String)>,
    pub mayor: bool,
}

pub struct PlanContext<'a> {
    pub name: &'a str,
    pub bio: &'a str,
    pub goal: &'a str,
    pub status: &'a AgentStatus,
    pub plan: Option<&'a Plan>,
    /// Retrieved memory texts, best first, as `(tick, text)`.
    pub memories: Vec<(Tick, String)>,
    pub observation: &'a Observation,
    pub tick: Tick,
    /// Seeded draw for choosing among equally good targets.
    pub tie_break: u64,
}

impl PlanContext<'_> {
    /// Shared prompt preamble: identity, goal, memories and surroundings.
    pub fn render_preamble(&self, out: &mut String) {
        let obs = self.observation;
        let _ = writeln!(out, "AGENT: {}", self.name);
        if !self.bio.is_empty() {
            let _ = writeln!(out, "BIO: {}", self.bio);
        }
        let _ = writeln!(out, "GOAL: {}", self.goal);
        let _ = writeln!(out, "TICK: {}", self.tick);
        let _ = writeln!(out, "POSITION: {}", obs.position);
        let _ = writeln!(out, "CASH: {}", obs.cash);
        if !self.memories.is_empty() {
            out.push_str("MEMORIES:\n");
            for (tick, text) in &self.memories {
                let _ = writeln!(out, "- (t{tick}) {text}");
            }
        }
        out.push_str("SURROUNDINGS:\n");
        for e in &obs.equipment {
            let _ = writeln!(out, "- equipment {} at {}: {}", e.kind, e.cell, e.description);
        }
        for b in &obs.buildings {
            let _ = writeln!(out, "- building {} at {}", b.kind, b.origin);
        }
        for a in &obs.agents {
            let _ = writeln!(out, "- person {} at {}", a.name, a.location);
        }
        if obs.mayor && !obs.buildable.is_empty() {
            out.push_str("BUILDABLE:\n");
            for (id, kind) in &obs.buildable {
                let _ = writeln!(out, "- {id}: {kind}");
            }
        }
    }

    pub fn render_plan(&self, out: &mut String) {
        if let Some(plan) = self.plan {
            out.push_str("PLAN:\n");
            for (i, s) in plan.subtasks.iter().enumerate() {
                let mark = if i < plan.cursor { "x" } else { " " };
                let _ = writeln!(out, "[{mark}] {s}");
            }
            if let Some(current) = plan.current() {
                let _ = writeln!(out, "CURRENT SUBTASK: {current}");
            }
        }
    }
}
