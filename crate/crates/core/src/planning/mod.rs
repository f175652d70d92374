//! Goal decomposition and step selection through a chain of pluggable
//! prompt modules (decompose, assess, decide).

mod context;
mod modules;
mod resolve;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use context::{Observation, PlanContext, SeenAgent, SeenBuilding, SeenEquipment};
pub use modules::{AssessModule, Decision, DecideModule, DecomposeModule, PromptModule};
pub use resolve::resolve_decision;

use crate::agent::{AgentAction, AgentId};
use crate::backend::{BackendError, Embedder, LlmCaller};
use crate::geom::Tick;
use crate::memory::{MemoryError, MemoryStore};

/// Consecutive decision failures before a plan is marked stuck.
pub const STUCK_THRESHOLD: u32 = 3;

/// Re-asks allowed after a response fails to parse.
pub const PARSE_RETRIES: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Active,
    Achieved,
    Stuck,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub goal: String,
    pub subtasks: Vec<String>,
    pub cursor: usize,
    pub status: PlanStatus,
    /// Consecutive failed decisions; reset on every successful one.
    #[serde(default)]
    pub failures: u32,
}

impl Plan {
    pub fn new(goal: impl Into<String>, subtasks: Vec<String>) -> Self {
        Self {
            goal: goal.into(),
            subtasks,
            cursor: 0,
            status: PlanStatus::Active,
            failures: 0,
        }
    }

    pub fn current(&self) -> Option<&str> {
        self.subtasks.get(self.cursor).map(String::as_str)
    }

    pub fn is_active(&self) -> bool {
        self.status == PlanStatus::Active
    }

    pub fn is_finished(&self) -> bool {
        self.cursor >= self.subtasks.len()
    }

    /// Record a failed decision; the plan goes stuck at the threshold.
    pub fn note_failure(&mut self) {
        self.failures += 1;
        if self.failures >= STUCK_THRESHOLD && self.status == PlanStatus::Active {
            self.status = PlanStatus::Stuck;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Achieved,
    Continue,
    Replan,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlanError {
    #[error("goal is empty")]
    EmptyGoal,
    #[error("plan is not active")]
    NotActive,
    #[error("{module}: could not parse response {response:?}")]
    Parse { module: String, response: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// A planner variant. Every variant must keep [`Plan`] invariants; only the
/// prompts and call pattern differ.
pub trait PlanningSystem: Send + Sync {
    fn id(&self) -> &str;

    fn make_plan(
        &self,
        goal: &str,
        ctx: &PlanContext<'_>,
        caller: &LlmCaller<'_>,
    ) -> Result<Plan, PlanError>;

    fn assess(
        &self,
        plan: &mut Plan,
        ctx: &PlanContext<'_>,
        caller: &LlmCaller<'_>,
    ) -> Result<Verdict, PlanError>;

    fn decide(
        &self,
        plan: &Plan,
        ctx: &PlanContext<'_>,
        caller: &LlmCaller<'_>,
    ) -> Result<Decision, PlanError>;
}

/// Ask `module`, re-asking once if the response does not parse.
pub(crate) fn ask_module<M: PromptModule + ?Sized>(
    module: &M,
    ctx: &PlanContext<'_>,
    caller: &LlmCaller<'_>,
) -> Result<M::Output, PlanError> {
    let prompt = module.render(ctx);
    let mut last = String::new();
    for _ in 0..=PARSE_RETRIES {
        let response = caller.ask(module.name(), &prompt)?;
        match module.parse(&response) {
            Some(out) => return Ok(out),
            None => last = response,
        }
    }
    Err(PlanError::Parse {
        module: module.name().to_string(),
        response: last,
    })
}

/// The default planner: decompose, then (optionally) assess, then decide.
pub struct ChainPlanner {
    id: String,
    decompose: Box<dyn PromptModule<Output = Vec<String>>>,
    assess: Option<Box<dyn PromptModule<Output = Verdict>>>,
    decide: Box<dyn PromptModule<Output = Decision>>,
}

impl ChainPlanner {
    pub fn new(
        id: impl Into<String>,
        decompose: Box<dyn PromptModule<Output = Vec<String>>>,
        assess: Option<Box<dyn PromptModule<Output = Verdict>>>,
        decide: Box<dyn PromptModule<Output = Decision>>,
    ) -> Self {
        Self { id: id.into(), decompose, assess, decide }
    }

    /// decompose → assess → decide with the stock prompt modules.
    pub fn baseline() -> Self {
        Self::new(
            crate::systems::BASELINE_PLANNER,
            Box::new(DecomposeModule),
            Some(Box::new(AssessModule)),
            Box::new(DecideModule),
        )
    }

    /// Skips the assessment call; the plan runs until its subtasks are done.
    pub fn reactive() -> Self {
        Self::new(
            crate::systems::REACTIVE_PLANNER,
            Box::new(DecomposeModule),
            None,
            Box::new(DecideModule),
        )
    }
}

impl PlanningSystem for ChainPlanner {
    fn id(&self) -> &str {
        &self.id
    }

    fn make_plan(
        &self,
        goal: &str,
        ctx: &PlanContext<'_>,
        caller: &LlmCaller<'_>,
    ) -> Result<Plan, PlanError> {
        if goal.trim().is_empty() {
            return Err(PlanError::EmptyGoal);
        }
        let subtasks = ask_module(self.decompose.as_ref(), ctx, caller)?;
        Ok(Plan::new(goal, subtasks))
    }

    fn assess(
        &self,
        plan: &mut Plan,
        ctx: &PlanContext<'_>,
        caller: &LlmCaller<'_>,
    ) -> Result<Verdict, PlanError> {
        if plan.is_finished() {
            plan.status = PlanStatus::Achieved;
            return Ok(Verdict::Achieved);
        }
        if !plan.is_active() {
            return Err(PlanError::NotActive);
        }
        let verdict = match &self.assess {
            Some(module) => ask_module(module.as_ref(), ctx, caller)?,
            None => Verdict::Continue,
        };
        if verdict == Verdict::Achieved {
            plan.cursor = plan.subtasks.len();
            plan.status = PlanStatus::Achieved;
        }
        Ok(verdict)
    }

    fn decide(
        &self,
        plan: &Plan,
        ctx: &PlanContext<'_>,
        caller: &LlmCaller<'_>,
    ) -> Result<Decision, PlanError> {
        if !plan.is_active() {
            return Err(PlanError::NotActive);
        }
        ask_module(self.decide.as_ref(), ctx, caller)
    }
}

/// Mark the current subtask done and remember it. Returns whether the plan
/// moved; finished or stuck plans are left alone.
pub fn advance(
    plan: &mut Plan,
    agent: AgentId,
    memory: &mut MemoryStore,
    tick: Tick,
    embedder: &dyn Embedder,
) -> Result<bool, MemoryError> {
    if !plan.is_active() || plan.is_finished() {
        return Ok(false);
    }
    let done = plan.subtasks[plan.cursor].clone();
    memory.store(agent, &format!("completed: {done}"), tick, embedder)?;
    plan.cursor += 1;
    if plan.is_finished() {
        plan.status = PlanStatus::Achieved;
    }
    Ok(true)
}

/// Pick the next action for the current subtask. Parse and resolution
/// failures fall back to idling and count toward the stuck threshold;
/// backend failures propagate.
pub fn next_action(
    planner: &dyn PlanningSystem,
    plan: &mut Plan,
    ctx: &PlanContext<'_>,
    caller: &LlmCaller<'_>,
) -> Result<AgentAction, BackendError> {
    let decision = match planner.decide(plan, ctx, caller) {
        Ok(d) => d,
        Err(PlanError::Backend(e)) => return Err(e),
        Err(e) => {
            log::debug!("agent {:?}: decision failed: {e}", caller.agent);
            plan.note_failure();
            return Ok(AgentAction::idle(ctx.tick));
        }
    };
    match resolve_decision(&decision, plan, ctx) {
        Some(action) => {
            plan.failures = 0;
            Ok(action)
        }
        None => {
            log::debug!("agent {:?}: cannot resolve {decision:?}", caller.agent);
            plan.note_failure();
            Ok(AgentAction::idle(ctx.tick))
        }
    }
}

#[cfg(test)]
mod tests;
