//! Equipment interaction: operation proposal, support-function feedback
//! and the learned skill cache.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentError, AgentState};
use crate::backend::{BackendError, LlmCaller};
use crate::geom::{Cash, Cell, Tick};
use crate::world::{EconomyDef, EquipmentDef, Outcome, SupportSpec};

/// Refinement retries after a failed first attempt.
pub const DEFAULT_RETRIES: u32 = 2;

/// Outcome used when a rule table has neither a match nor a fallback.
pub const NO_RULE_OUTCOME: &str = "Nothing happens";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ToolError {
    #[error("purpose is empty")]
    EmptyPurpose,
    #[error("operation is empty")]
    EmptyOperation,
    #[error("agent at {agent} is not adjacent to equipment at {equipment}")]
    NotAdjacent { agent: Cell, equipment: Cell },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSource {
    RuleTable,
    ModelBacked,
    Economy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub outcome: String,
    pub success: bool,
    pub source: FeedbackSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skill {
    pub equipment_kind: String,
    /// Normalized purpose.
    pub purpose: String,
    pub operation: String,
    pub outcome: String,
    pub success: bool,
    pub learned_tick: Tick,
}

/// Lowercased, trimmed, whitespace-collapsed purpose used as a skill key.
pub fn normalize_purpose(purpose: &str) -> String {
    purpose
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Successful equipment-operation pairs, at most one per (kind, purpose).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SkillStore {
    skills: Vec<Skill>,
}

impl SkillStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, equipment_kind: &str, purpose: &str) -> Option<&Skill> {
        let key = normalize_purpose(purpose);
        self.skills
            .iter()
            .find(|s| s.equipment_kind == equipment_kind && s.purpose == key)
    }

    fn upsert(&mut self, skill: Skill) {
        match self
            .skills
            .iter_mut()
            .find(|s| s.equipment_kind == skill.equipment_kind && s.purpose == skill.purpose)
        {
            Some(existing) => *existing = skill,
            None => self.skills.push(skill),
        }
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Skill> {
        self.skills.iter()
    }
}

/// One operation tried against a piece of equipment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub operation: String,
    pub feedback: Feedback,
    /// True when the operation came from the skill store.
    pub from_skill: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub operation: String,
    pub from_skill: bool,
}

fn render_propose(agent: &str, equipment: &EquipmentDef, purpose: &str, previous: &[Attempt]) -> String {
    let mut out = String::from("[tool.propose]\n");
    let _ = writeln!(out, "AGENT: {agent}");
    let _ = writeln!(out, "EQUIPMENT: {}", equipment.kind);
    let _ = writeln!(out, "DESCRIPTION: {}", equipment.description);
    let _ = writeln!(out, "PURPOSE: {purpose}");
    if !previous.is_empty() {
        out.push_str("PREVIOUS ATTEMPTS:\n");
        for a in previous {
            let _ = writeln!(out, "- \"{}\" -> {}", a.operation, a.feedback.outcome);
        }
    }
    out.push_str("Reply with the operation to perform: `OPERATION: <text>`.\n");
    out
}

fn parse_operation(response: &str) -> Option<String> {
    let mut lines = response.lines().map(str::trim).filter(|l| !l.is_empty());
    let tagged = response.lines().map(str::trim).find_map(|l| {
        l.get(..10)
            .filter(|h| h.eq_ignore_ascii_case("OPERATION:"))
            .map(|_| l[10..].trim().to_string())
    });
    tagged
        .or_else(|| lines.next().map(str::to_string))
        .filter(|s| !s.is_empty())
}

/// Reuse a learned operation when one matches (no backend call); otherwise
/// infer one from the equipment description. `previous` lists failed
/// attempts in this use, appended to the prompt for refinement.
pub fn propose_operation(
    agent_name: &str,
    equipment: &EquipmentDef,
    purpose: &str,
    skills: &SkillStore,
    previous: &[Attempt],
    caller: &LlmCaller<'_>,
) -> Result<Proposal, ToolError> {
    if purpose.trim().is_empty() {
        return Err(ToolError::EmptyPurpose);
    }
    if previous.is_empty() {
        if let Some(skill) = skills.get(&equipment.kind, purpose) {
            return Ok(Proposal {
                operation: skill.operation.clone(),
                from_skill: true,
            });
        }
    }
    let response = caller.ask("tool.propose", &render_propose(agent_name, equipment, purpose, previous))?;
    Ok(Proposal {
        operation: parse_operation(&response).unwrap_or_else(|| purpose.trim().to_string()),
        from_skill: false,
    })
}

fn render_support(equipment: &EquipmentDef, operation: &str) -> String {
    let mut out = String::from("[tool.support]\n");
    let _ = writeln!(out, "EQUIPMENT: {}", equipment.kind);
    let _ = writeln!(out, "DESCRIPTION: {}", equipment.description);
    let _ = writeln!(out, "OPERATION: {operation}");
    out.push_str(
        "Describe the outcome of this operation in one sentence, \
         then a final line `RESULT: ok` or `RESULT: fail`.\n",
    );
    out
}

/// Split a support-model reply into outcome text and the `RESULT:` verdict.
/// A missing trailer counts as failure.
fn parse_support(response: &str) -> (String, bool) {
    let mut success = false;
    let mut text = Vec::new();
    for line in response.lines() {
        let t = line.trim();
        match t.get(..7).filter(|h| h.eq_ignore_ascii_case("RESULT:")) {
            Some(_) => success = t[7..].trim().eq_ignore_ascii_case("ok"),
            None if !t.is_empty() => text.push(t),
            None => {}
        }
    }
    let outcome = if text.is_empty() {
        "(no outcome)".to_string()
    } else {
        text.join(" ")
    };
    (outcome, success)
}

/// Run an operation through the equipment's support function.
/// `support` is only consulted for model-backed equipment.
pub fn interact(
    operation: &str,
    equipment: &EquipmentDef,
    support: &LlmCaller<'_>,
) -> Result<Feedback, ToolError> {
    if operation.trim().is_empty() {
        return Err(ToolError::EmptyOperation);
    }
    match &equipment.support {
        SupportSpec::RuleTable { .. } => {
            let Outcome { outcome, success } = equipment
                .support
                .evaluate_rules(operation)
                .unwrap_or_else(|| Outcome {
                    outcome: NO_RULE_OUTCOME.to_string(),
                    success: false,
                });
            Ok(Feedback {
                outcome,
                success,
                source: FeedbackSource::RuleTable,
            })
        }
        SupportSpec::ModelBacked => {
            let response = support.ask("tool.support", &render_support(equipment, operation))?;
            let (outcome, success) = parse_support(&response);
            Ok(Feedback {
                outcome,
                success,
                source: FeedbackSource::ModelBacked,
            })
        }
    }
}

/// Store a skill on success. Returns true when the store changed.
pub fn learn(
    equipment: &EquipmentDef,
    purpose: &str,
    operation: &str,
    feedback: &Feedback,
    skills: &mut SkillStore,
    tick: Tick,
) -> bool {
    if !feedback.success {
        return false;
    }
    skills.upsert(Skill {
        equipment_kind: equipment.kind.clone(),
        purpose: normalize_purpose(purpose),
        operation: operation.to_string(),
        outcome: feedback.outcome.clone(),
        success: true,
        learned_tick: tick,
    });
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UseReport {
    pub attempts: Vec<Attempt>,
    /// Item and price charged.
    pub purchase: Option<(String, Cash)>,
    pub salary: Option<Cash>,
    pub learned: bool,
    pub gave_up: bool,
}

impl UseReport {
    pub fn succeeded(&self) -> bool {
        self.attempts.last().is_some_and(|a| a.feedback.success)
    }

    pub fn inference_calls(&self) -> usize {
        self.attempts.iter().filter(|a| !a.from_skill).count()
    }
}

/// Everything `use_equipment` needs besides the agent and skill store.
pub struct UseRequest<'a> {
    pub equipment: &'a EquipmentDef,
    pub cell: Cell,
    pub purpose: &'a str,
    /// Operation already proposed for the first attempt, if any.
    pub first: Option<Proposal>,
    pub economy: Option<&'a EconomyDef>,
    pub retries: u32,
    pub tick: Tick,
}

fn economy_feedback(agent: &AgentState, err: &AgentError) -> Feedback {
    let outcome = match err {
        AgentError::InsufficientCash { item, price, cash } => {
            format!("You cannot afford {item}: it costs {price} and you have {cash}")
        }
        other => other.to_string(),
    };
    log::debug!("agent {} purchase refused: {outcome}", agent.id);
    Feedback {
        outcome,
        success: false,
        source: FeedbackSource::Economy,
    }
}

/// Propose, interact and learn, refining up to `retries` times after a
/// failure. A successful outcome naming a menu item charges its price; one
/// mentioning work pays the equipment's salary.
pub fn use_equipment(
    agent: &mut AgentState,
    request: UseRequest<'_>,
    skills: &mut SkillStore,
    inference: &LlmCaller<'_>,
    support: &LlmCaller<'_>,
) -> Result<UseReport, ToolError> {
    let UseRequest { equipment, cell, purpose, first, economy, retries, tick } = request;
    if !agent.location.is_adjacent(cell) {
        return Err(ToolError::NotAdjacent {
            agent: agent.location,
            equipment: cell,
        });
    }
    if purpose.trim().is_empty() {
        return Err(ToolError::EmptyPurpose);
    }
    let mut report = UseReport::default();
    let mut first = first;
    for _ in 0..=retries {
        let proposal = match first.take() {
            Some(p) => p,
            None => propose_operation(
                &agent.profile.name,
                equipment,
                purpose,
                skills,
                &report.attempts,
                inference,
            )?,
        };
        let mut feedback = interact(&proposal.operation, equipment, support)?;

        if feedback.success {
            if let Some(econ) = economy {
                if let Some((item, _)) = econ.item_named_in(&feedback.outcome) {
                    let item = item.to_string();
                    match agent.purchase(&item, econ) {
                        Ok(price) => report.purchase = Some((item, price)),
                        Err(e) => {
                            feedback = economy_feedback(agent, &e);
                            report.attempts.push(Attempt {
                                operation: proposal.operation,
                                feedback,
                                from_skill: proposal.from_skill,
                            });
                            report.gave_up = true;
                            return Ok(report);
                        }
                    }
                }
                if feedback.outcome.to_lowercase().contains("work") {
                    report.salary = Some(agent.earn_salary(econ));
                }
            }
        }

        report.learned |= learn(equipment, purpose, &proposal.operation, &feedback, skills, tick);
        let success = feedback.success;
        report.attempts.push(Attempt {
            operation: proposal.operation,
            feedback,
            from_skill: proposal.from_skill,
        });
        if success {
            return Ok(report);
        }
    }
    report.gave_up = true;
    Ok(report)
}
