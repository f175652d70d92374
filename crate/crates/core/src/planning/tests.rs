use super::*;
use crate::agent::{ActionKind, AgentStatus};
use crate::backend::{CallLog, HashingEmbedder, ScriptRule, ScriptedBackend};
use crate::geom::Cell;

const ADA: AgentId = AgentId(1);

fn counter_obs(position: Cell) -> Observation {
    Observation {
        position,
        cash: 100,
        equipment: vec![SeenEquipment {
            equipment_id: 1,
            kind: "counter".into(),
            description: "a shop counter".into(),
            building_id: 1,
            cell: Cell::new(3, 3),
        }],
        buildings: vec![SeenBuilding {
            building_id: 1,
            kind: "store".into(),
            origin: Cell::new(2, 2),
            targets: vec![Cell::new(3, 3)],
        }],
        ..Observation::default()
    }
}

fn ctx<'a>(obs: &'a Observation, plan: Option<&'a Plan>, status: &'a AgentStatus) -> PlanContext<'a> {
    PlanContext {
        name: "Ada",
        bio: "",
        goal: "buy chicken at the store",
        status,
        plan,
        memories: vec![],
        observation: obs,
        tick: 4,
        tie_break: 0,
    }
}

fn scripted() -> ScriptedBackend {
    ScriptedBackend::new(
        vec![
            ScriptRule::all_of(["[plan.decompose]", "buy chicken at the store"], "SUBTASK: go to store\nSUBTASK: buy chicken"),
            ScriptRule::contains("CURRENT SUBTASK: go to store", "ACTION: move store"),
            ScriptRule::contains("CURRENT SUBTASK: buy chicken", "ACTION: use counter"),
            ScriptRule::contains("[plan.assess]", "VERDICT: continue"),
        ],
        "???",
    )
}

fn caller<'a>(backend: &'a ScriptedBackend, log: &'a CallLog) -> LlmCaller<'a> {
    LlmCaller { backend_id: "scripted", backend, log, tick: 4, agent: Some(ADA) }
}

#[test]
fn make_plan_uses_the_decomposition_rule() {
    let (b, log) = (scripted(), CallLog::new());
    let obs = counter_obs(Cell::new(8, 8));
    let plan = ChainPlanner::baseline()
        .make_plan("buy chicken at the store", &ctx(&obs, None, &AgentStatus::Idle), &caller(&b, &log))
        .unwrap();
    // The rule's response, line by line.
    let expected: Vec<String> = b
        .respond("[plan.decompose]\nbuy chicken at the store")
        .lines()
        .map(|l| l.trim_start_matches("SUBTASK: ").to_string())
        .collect();
    assert_eq!(plan.subtasks, expected);
    assert_eq!((plan.cursor, plan.status), (0, PlanStatus::Active));
}

#[test]
fn empty_goal_is_rejected_without_a_call() {
    let (b, log) = (scripted(), CallLog::new());
    let obs = counter_obs(Cell::new(8, 8));
    let err = ChainPlanner::baseline()
        .make_plan("  ", &ctx(&obs, None, &AgentStatus::Idle), &caller(&b, &log))
        .unwrap_err();
    assert_eq!(err, PlanError::EmptyGoal);
    assert!(log.is_empty());
}

#[test]
fn gibberish_twice_is_a_parse_error() {
    let b = ScriptedBackend::new(vec![], "blah blah");
    let log = CallLog::new();
    let obs = counter_obs(Cell::new(8, 8));
    let err = ChainPlanner::baseline()
        .make_plan("buy chicken", &ctx(&obs, None, &AgentStatus::Idle), &caller(&b, &log))
        .unwrap_err();
    assert!(matches!(err, PlanError::Parse { ref module, .. } if module == "plan.decompose"));
    assert_eq!(b.call_count(), 1 + PARSE_RETRIES as usize);
}

#[test]
fn assess_finished_plan_without_a_call() {
    let (b, log) = (scripted(), CallLog::new());
    let obs = counter_obs(Cell::new(8, 8));
    let mut plan = Plan::new("g", vec!["a".into()]);
    plan.cursor = 1;
    let verdict = ChainPlanner::baseline()
        .assess(&mut plan, &ctx(&obs, None, &AgentStatus::Idle), &caller(&b, &log))
        .unwrap();
    assert_eq!(verdict, Verdict::Achieved);
    assert_eq!(plan.status, PlanStatus::Achieved);
    assert_eq!(b.call_count(), 0);
}

#[test]
fn assess_continue_and_replan() {
    let log = CallLog::new();
    let obs = counter_obs(Cell::new(8, 8));
    let status = AgentStatus::Idle;
    let mut plan = Plan::new("g", vec!["a".into(), "b".into()]);
    let b = scripted();
    let v = ChainPlanner::baseline().assess(&mut plan, &ctx(&obs, None, &status), &caller(&b, &log)).unwrap();
    assert_eq!(v, Verdict::Continue);
    assert_eq!(plan.status, PlanStatus::Active);

    let replan = ScriptedBackend::new(vec![], "VERDICT: replan");
    let v = ChainPlanner::baseline().assess(&mut plan, &ctx(&obs, None, &status), &caller(&replan, &log)).unwrap();
    assert_eq!(v, Verdict::Replan);

    let done = ScriptedBackend::new(vec![], "VERDICT: achieved");
    ChainPlanner::baseline().assess(&mut plan, &ctx(&obs, None, &status), &caller(&done, &log)).unwrap();
    assert_eq!((plan.status, plan.cursor), (PlanStatus::Achieved, 2));
}

#[test]
fn reactive_planner_never_calls_assess() {
    let (b, log) = (scripted(), CallLog::new());
    let obs = counter_obs(Cell::new(8, 8));
    let mut plan = Plan::new("g", vec!["a".into()]);
    let v = ChainPlanner::reactive()
        .assess(&mut plan, &ctx(&obs, None, &AgentStatus::Idle), &caller(&b, &log))
        .unwrap();
    assert_eq!(v, Verdict::Continue);
    assert!(log.is_empty());
}

#[test]
fn advance_writes_one_memory_and_terminates() {
    let e = HashingEmbedder::default();
    let mut m = MemoryStore::new(e.dimension());
    let mut plan = Plan::new("g", vec!["go to store".into(), "buy chicken".into()]);
    assert!(advance(&mut plan, ADA, &mut m, 3, &e).unwrap());
    assert_eq!(plan.cursor, 1);
    assert_eq!(m.records_for(ADA)[0].text, "completed: go to store");
    assert_eq!(m.records_for(ADA)[0].tick, 3);
    assert!(advance(&mut plan, ADA, &mut m, 4, &e).unwrap());
    assert_eq!((plan.cursor, plan.status), (2, PlanStatus::Achieved));
    assert!(!advance(&mut plan, ADA, &mut m, 5, &e).unwrap());
    assert_eq!(m.len(), 2);
}

#[test]
fn next_action_moves_toward_the_store() {
    let (b, log) = (scripted(), CallLog::new());
    let obs = counter_obs(Cell::new(8, 8));
    let mut plan = Plan::new("g", vec!["go to store".into(), "buy chicken".into()]);
    let status = AgentStatus::Idle;
    let snapshot = plan.clone();
    let action =
        next_action(&ChainPlanner::baseline(), &mut plan, &ctx(&obs, Some(&snapshot), &status), &caller(&b, &log))
            .unwrap();
    assert_eq!(action.kind, ActionKind::Move { target: Cell::new(3, 3), en_route: false });
    assert_eq!(action.issued_tick, 4);
}

#[test]
fn next_action_uses_adjacent_counter() {
    let (b, log) = (scripted(), CallLog::new());
    let obs = counter_obs(Cell::new(3, 4));
    let mut plan = Plan::new("g", vec!["go to store".into(), "buy chicken".into()]);
    plan.cursor = 1;
    let status = AgentStatus::Idle;
    let snapshot = plan.clone();
    let action =
        next_action(&ChainPlanner::baseline(), &mut plan, &ctx(&obs, Some(&snapshot), &status), &caller(&b, &log))
            .unwrap();
    assert_eq!(
        action.kind,
        ActionKind::Use {
            equipment_id: 1,
            cell: Cell::new(3, 3),
            purpose: "buy chicken".into(),
            operation: "buy chicken".into(),
        }
    );
}

#[test]
fn three_parse_failures_make_the_plan_stuck() {
    let b = ScriptedBackend::new(vec![], "no idea");
    let log = CallLog::new();
    let obs = counter_obs(Cell::new(8, 8));
    let status = AgentStatus::Idle;
    let mut plan = Plan::new("g", vec!["go to store".into()]);
    for i in 1..=STUCK_THRESHOLD {
        let snapshot = plan.clone();
        let a = next_action(&ChainPlanner::baseline(), &mut plan, &ctx(&obs, Some(&snapshot), &status), &caller(&b, &log))
            .unwrap();
        assert_eq!(a.kind, ActionKind::Idle);
        assert_eq!(plan.failures, i);
    }
    assert_eq!(plan.status, PlanStatus::Stuck);
}

#[test]
fn unresolvable_decision_counts_as_failure() {
    let b = ScriptedBackend::new(vec![], "ACTION: use piano");
    let log = CallLog::new();
    let obs = counter_obs(Cell::new(8, 8));
    let status = AgentStatus::Idle;
    let mut plan = Plan::new("g", vec!["play".into()]);
    let snapshot = plan.clone();
    next_action(&ChainPlanner::baseline(), &mut plan, &ctx(&obs, Some(&snapshot), &status), &caller(&b, &log)).unwrap();
    assert_eq!(plan.failures, 1);
}

#[test]
fn module_chain_is_referentially_transparent() {
    let obs = counter_obs(Cell::new(8, 8));
    let status = AgentStatus::Idle;
    let plan = Plan::new("g", vec!["go to store".into()]);
    let run = || {
        let (b, log) = (scripted(), CallLog::new());
        let c = ctx(&obs, Some(&plan), &status);
        let planner = ChainPlanner::baseline();
        let made = planner.make_plan("buy chicken at the store", &c, &caller(&b, &log)).unwrap();
        let decision = planner.decide(&plan, &c, &caller(&b, &log)).unwrap();
        (made, decision, b.prompts())
    };
    assert_eq!(run(), run());
}

/// A decompose variant that always returns a fixed list.
struct Fixed;

impl PromptModule for Fixed {
    type Output = Vec<String>;
    fn name(&self) -> &str {
        "plan.fixed"
    }
    fn render(&self, _: &PlanContext<'_>) -> String {
        "[plan.fixed]".into()
    }
    fn parse(&self, _: &str) -> Option<Vec<String>> {
        Some(vec!["one".into(), "two".into(), "three".into()])
    }
}

#[test]
fn swapping_a_module_keeps_plan_invariants() {
    let (b, log) = (scripted(), CallLog::new());
    let obs = counter_obs(Cell::new(8, 8));
    let status = AgentStatus::Idle;
    let planner = ChainPlanner::new("fixed", Box::new(Fixed), Some(Box::new(AssessModule)), Box::new(DecideModule));
    let mut plan = planner.make_plan("anything", &ctx(&obs, None, &status), &caller(&b, &log)).unwrap();
    assert_eq!(planner.id(), "fixed");
    assert_eq!(plan.subtasks.len(), 3);
    let e = HashingEmbedder::default();
    let mut m = MemoryStore::new(e.dimension());
    let mut last = plan.cursor;
    while advance(&mut plan, ADA, &mut m, 0, &e).unwrap() {
        assert!(plan.cursor > last && plan.cursor <= plan.subtasks.len());
        last = plan.cursor;
    }
    assert_eq!((plan.status, plan.cursor), (PlanStatus::Achieved, 3));
}

#[test]
fn decide_prompt_lists_build_only_for_mayor() {
    let mut obs = counter_obs(Cell::new(8, 8));
    let status = AgentStatus::Idle;
    assert!(!DecideModule.render(&ctx(&obs, None, &status)).contains("ACTION: build"));
    obs.mayor = true;
    assert!(DecideModule.render(&ctx(&obs, None, &status)).contains("ACTION: build"));
}
