use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agent::AgentId;
use crate::engine::{Event, EventKind, SimState};
use crate::geom::{Cash, Tick};
use crate::tools::normalize_purpose;

/// A goal condition over the simulation state and its event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalPredicate {
    CashAtLeast { agent: String, amount: Cash },
    BuildingExists { kind: String },
    SkillLearned { agent: String, equipment_kind: String, purpose: String },
    MemoryContains { agent: String, substring: String },
    /// An event of `kind` whose payload contains `payload` as a subset.
    EventOccurred {
        kind: EventKind,
        #[serde(default)]
        payload: Value,
    },
    All(Vec<GoalPredicate>),
    Any(Vec<GoalPredicate>),
    Not(Box<GoalPredicate>),
    /// Holds at some tick no later than `ticks`.
    Within { ticks: Tick, predicate: Box<GoalPredicate> },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PredicateError {
    #[error("predicate names unknown agent {0:?}")]
    UnknownAgent(String),
}

/// Whether `actual` contains everything in `pattern`: objects key-wise,
/// everything else by equality.
pub fn json_subset(pattern: &Value, actual: &Value) -> bool {
    match (pattern, actual) {
        (Value::Null, _) => true,
        (Value::Object(p), Value::Object(a)) => p
            .iter()
            .all(|(k, v)| a.get(k).is_some_and(|av| json_subset(v, av))),
        _ => pattern == actual,
    }
}

struct Ctx<'a> {
    state: &'a SimState,
    log: &'a [Event],
}

impl Ctx<'_> {
    fn agent_id(&self, name: &str) -> Result<AgentId, PredicateError> {
        if let Some(a) = self.state.agent_named(name) {
            return Ok(a.id);
        }
        self.log
            .iter()
            .filter(|e| e.kind == EventKind::AgentCreated)
            .find(|e| e.payload.get("name").and_then(Value::as_str) == Some(name))
            .and_then(Event::agent_created_id)
            .ok_or_else(|| PredicateError::UnknownAgent(name.to_string()))
    }

    fn upto(&self, at: Tick) -> impl Iterator<Item = &Event> {
        self.log.iter().take_while(move |e| e.tick <= at)
    }

    /// Cash at the end of tick `at`, replayed from economy events.
    fn cash_at(&self, id: AgentId, at: Tick) -> Option<Cash> {
        let mut cash: Option<Cash> = None;
        for e in self.upto(at) {
            let field = |k: &str| e.payload.get(k).and_then(Value::as_u64);
            match e.kind {
                EventKind::AgentCreated if e.agent_created_id() == Some(id) => cash = field("cash"),
                EventKind::Purchase if e.agent() == Some(id) => {
                    cash = cash.map(|c| c.saturating_sub(field("price").unwrap_or(0)))
                }
                EventKind::Salary if e.agent() == Some(id) => {
                    cash = cash.map(|c| c + field("amount").unwrap_or(0))
                }
                _ => {}
            }
        }
        cash
    }

    fn eval(&self, p: &GoalPredicate, at: Option<Tick>) -> Result<bool, PredicateError> {
        let horizon = at.unwrap_or(self.state.tick);
        Ok(match p {
            GoalPredicate::All(ps) => {
                for q in ps {
                    if !self.eval(q, at)? {
                        return Ok(false);
                    }
                }
                true
            }
            GoalPredicate::Any(ps) => {
                for q in ps {
                    if self.eval(q, at)? {
                        return Ok(true);
                    }
                }
                false
            }
            GoalPredicate::Not(q) => !self.eval(q, at)?,
            GoalPredicate::Within { ticks, predicate } => {
                let limit = (*ticks).min(horizon);
                let mut candidates: Vec<Tick> = std::iter::once(0)
                    .chain(self.upto(limit).map(|e| e.tick))
                    .collect();
                candidates.dedup();
                for t in candidates {
                    if self.eval(predicate, Some(t))? {
                        return Ok(true);
                    }
                }
                false
            }
            GoalPredicate::CashAtLeast { agent, amount } => {
                let id = self.agent_id(agent)?;
                let cash = match at {
                    None => self.state.agents.get(&id).map(|a| a.cash),
                    Some(t) => self.cash_at(id, t),
                };
                cash.is_some_and(|c| c >= *amount)
            }
            GoalPredicate::BuildingExists { kind } => match at {
                None => self.state.map.has_building_kind(kind),
                Some(t) => self.upto(t).any(|e| {
                    e.kind == EventKind::BuildingPlaced
                        && e.payload.get("kind").and_then(Value::as_str) == Some(kind)
                }),
            },
            GoalPredicate::SkillLearned { agent, equipment_kind, purpose } => {
                let id = self.agent_id(agent)?;
                let key = normalize_purpose(purpose);
                match at {
                    None => self
                        .state
                        .skills_for(id)
                        .and_then(|s| s.get(equipment_kind, purpose))
                        .is_some(),
                    Some(t) => self.upto(t).any(|e| {
                        e.kind == EventKind::Feedback
                            && e.agent() == Some(id)
                            && e.payload.get("learned") == Some(&Value::Bool(true))
                            && e.payload.get("kind").and_then(Value::as_str) == Some(equipment_kind)
                            && e.payload
                                .get("purpose")
                                .and_then(Value::as_str)
                                .is_some_and(|p| normalize_purpose(p) == key)
                    }),
                }
            }
            GoalPredicate::MemoryContains { agent, substring } => {
                let id = self.agent_id(agent)?;
                self.state
                    .memories
                    .records_for(id)
                    .iter()
                    .any(|r| r.tick <= horizon && r.text.contains(substring.as_str()))
            }
            GoalPredicate::EventOccurred { kind, payload } => self
                .upto(horizon)
                .any(|e| e.kind == *kind && json_subset(payload, &e.payload)),
        })
    }
}

/// Evaluate against the final state and the log that produced it. Pure:
/// reads only `state` and `log`, never a backend.
pub fn evaluate_predicate(p: &GoalPredicate, state: &SimState, log: &[Event]) -> Result<bool, PredicateError> {
    Ctx { state, log }.eval(p, None)
}

/// Evaluate as of the end of tick `at`, replaying the log.
pub fn evaluate_predicate_at(
    p: &GoalPredicate,
    state: &SimState,
    log: &[Event],
    at: Tick,
) -> Result<bool, PredicateError> {
    Ctx { state, log }.eval(p, Some(at))
}
