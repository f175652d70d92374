use std::collections::BTreeMap;
use std::sync::Arc;

use super::*;
use crate::backend::{CallLog, CompletionBackend, HashingEmbedder, ScriptRule, ScriptedBackend};
use crate::planning::{ChainPlanner, Plan, SeenEquipment};
use crate::systems::SystemsRegistry;
use crate::tools::SkillStore;
use crate::world::{BuildingDef, EquipmentDef, Outcome, SupportSpec};

fn registry() -> BackendRegistry {
    let mut r = BackendRegistry::new();
    r.register("scripted", Arc::new(ScriptedBackend::new(vec![], "ACTION: idle"))).unwrap();
    r
}

fn map_with_wall() -> WorldMap {
    let mut map = WorldMap::new(10, 10);
    let wall = BuildingDef {
        id: 1,
        kind: "wall".into(),
        assets: "wall".into(),
        price: 0,
        blocks: vec![vec![1]],
        equipment_slots: vec![],
    };
    map.place_building(&wall, Cell::new(5, 5)).unwrap();
    map
}

fn create(profile: AgentProfile, spawn: Cell, names: &[&str]) -> Result<AgentState, AgentError> {
    create_agent(
        AgentId(1),
        profile,
        spawn,
        names.iter().copied(),
        &registry(),
        &SystemsRegistry::standard(),
        &map_with_wall(),
    )
}

#[test]
fn create_agent_starts_idle_with_starting_cash() {
    let a = create(AgentProfile::new("Ada", "scripted").with_cash(100), Cell::new(1, 1), &[]).unwrap();
    assert_eq!((a.cash, a.location, a.status.clone()), (100, Cell::new(1, 1), AgentStatus::Idle));
    assert!(a.plan.is_none());
}

#[test]
fn create_agent_errors() {
    let ada = || AgentProfile::new("Ada", "scripted");
    assert!(matches!(create(ada(), Cell::new(1, 1), &["Ada"]), Err(AgentError::DuplicateName(n)) if n == "Ada"));
    assert!(matches!(
        create(AgentProfile::new("Ada", "gpt9"), Cell::new(1, 1), &[]),
        Err(AgentError::UnknownBackend(b)) if b == "gpt9"
    ));
    let mut p = ada();
    p.plan_system_id = "tree-of-thought".into();
    assert!(matches!(create(p, Cell::new(1, 1), &[]), Err(AgentError::UnknownSystem { kind: "planning", .. })));
    let mut p = ada();
    p.memory_system_id = "episodic".into();
    assert!(matches!(create(p, Cell::new(1, 1), &[]), Err(AgentError::UnknownSystem { kind: "memory", .. })));
    assert!(matches!(create(ada(), Cell::new(5, 5), &[]), Err(AgentError::InvalidSpawn { .. })));
    assert!(matches!(create(ada(), Cell::new(10, 0), &[]), Err(AgentError::InvalidSpawn { .. })));
    assert!(matches!(create(AgentProfile::new(" ", "scripted"), Cell::new(1, 1), &[]), Err(AgentError::EmptyName)));
}

#[test]
fn profile_accepts_listing_field_names() {
    let p: AgentProfile = serde_json::from_str(
        r#"{"name":"Ada","bio":"b","goal":"g","model":"scripted","memorySystem":"no-memory",
            "planSystem":"reactive-planner","buildings":[1],"cash":100}"#,
    )
    .unwrap();
    assert_eq!(p.backend_id, "scripted");
    assert_eq!(p.memory_system_id, "no-memory");
    assert_eq!(p.plan_system_id, "reactive-planner");
    assert_eq!((p.owned_buildings.clone(), p.starting_cash), (vec![1], 100));
}

fn chicken_economy(salary: Cash) -> EconomyDef {
    EconomyDef { equipment_id: 1, menu: BTreeMap::from([("chicken".to_string(), 20)]), salary }
}

#[test]
fn purchase_examples() {
    let econ = chicken_economy(0);
    let mut a = AgentState::new(AgentId(1), AgentProfile::new("Ada", "s").with_cash(100), Cell::new(0, 0));
    assert_eq!(a.purchase("chicken", &econ).unwrap(), 20);
    assert_eq!(a.cash, 80);

    a.cash = 10;
    assert!(matches!(a.purchase("chicken", &econ), Err(AgentError::InsufficientCash { price: 20, cash: 10, .. })));
    assert_eq!(a.cash, 10);
    assert!(matches!(a.purchase("tofu", &econ), Err(AgentError::UnknownItem(i)) if i == "tofu"));
}

#[test]
fn salary_examples() {
    let mut a = AgentState::new(AgentId(1), AgentProfile::new("Ada", "s").with_cash(80), Cell::new(0, 0));
    a.earn_salary(&chicken_economy(0));
    assert_eq!(a.cash, 80);
    a.earn_salary(&chicken_economy(15));
    assert_eq!(a.cash, 95);
    a.earn_salary(&chicken_economy(15));
    assert_eq!(a.cash, 110);
}

fn config() -> WorldConfig {
    let stove = EquipmentDef {
        id: 2,
        kind: "stove".into(),
        support: SupportSpec::RuleTable {
            rules: vec![],
            fallback: Some(Outcome { outcome: "Meaningless operation".into(), success: false }),
        },
        description: "A stove for cooking food and boiling water.".into(),
    };
    WorldConfig::from_parts(vec![stove], vec![], vec![]).unwrap()
}

fn scripted() -> ScriptedBackend {
    ScriptedBackend::new(
        vec![
            ScriptRule::contains("[plan.decompose]", "SUBTASK: go to store\nSUBTASK: get tea"),
            ScriptRule::contains("[plan.assess]", "VERDICT: continue"),
            ScriptRule::contains("CURRENT SUBTASK: go to store", "ACTION: move 3,3"),
            ScriptRule::contains("CURRENT SUBTASK: get tea", "ACTION: use stove"),
            ScriptRule::contains("[tool.propose]", "OPERATION: Get a cup of tea"),
        ],
        "ACTION: idle",
    )
}

struct Fixture {
    obs: Observation,
    config: WorldConfig,
    planner: ChainPlanner,
    memory: MemoryStore,
    skills: SkillStore,
    embedder: HashingEmbedder,
    log: CallLog,
}

impl Fixture {
    fn new(position: Cell) -> Self {
        let embedder = HashingEmbedder::default();
        Self {
            obs: Observation {
                position,
                equipment: vec![SeenEquipment {
                    equipment_id: 2,
                    kind: "stove".into(),
                    description: "A stove".into(),
                    building_id: 3,
                    cell: Cell::new(2, 2),
                }],
                ..Observation::default()
            },
            config: config(),
            planner: ChainPlanner::baseline(),
            memory: MemoryStore::new(embedder.dimension()),
            skills: SkillStore::new(),
            embedder,
            log: CallLog::new(),
        }
    }

    fn input<'a>(&'a self, backend: &'a dyn CompletionBackend) -> StepInput<'a> {
        StepInput {
            observation: &self.obs,
            config: &self.config,
            planner: &self.planner,
            recall_k: 5,
            memory: &self.memory,
            skills: &self.skills,
            embedder: &self.embedder,
            caller: LlmCaller { backend_id: "scripted", backend, log: &self.log, tick: 7, agent: Some(AgentId(1)) },
            tick: 7,
            tie_break: 0,
        }
    }
}

fn agent(at: Cell, goal: &str) -> AgentState {
    AgentState::new(AgentId(1), AgentProfile::new("Ada", "scripted").with_goal(goal), at)
}

#[test]
fn step_moves_toward_store() {
    let b = scripted();
    let f = Fixture::new(Cell::new(8, 8));
    let mut a = agent(Cell::new(8, 8), "have tea");
    let step = step_agent(&mut a, &f.input(&b)).unwrap();
    assert_eq!(step.notes, vec![PlanNote::Created { subtasks: vec!["go to store".into(), "get tea".into()] }]);
    // Replay the decide rule and parse it as the planner would.
    let decided = b.respond("CURRENT SUBTASK: go to store").trim_start_matches("ACTION: move ");
    assert_eq!(decided, "3,3");
    assert_eq!(step.action.kind, ActionKind::Move { target: Cell::new(3, 3), en_route: false });
}

#[test]
fn empty_goal_idles_without_calls() {
    let b = scripted();
    let f = Fixture::new(Cell::new(8, 8));
    let mut a = agent(Cell::new(8, 8), "");
    let step = step_agent(&mut a, &f.input(&b)).unwrap();
    assert_eq!(step.action.kind, ActionKind::Idle);
    assert!(f.log.is_empty());
}

#[test]
fn adjacent_to_stove_uses_it_with_proposed_operation() {
    let b = scripted();
    let f = Fixture::new(Cell::new(3, 3));
    let mut a = agent(Cell::new(3, 3), "have tea");
    let mut plan = Plan::new("have tea", vec!["go to store".into(), "get tea".into()]);
    plan.cursor = 1;
    a.plan = Some(plan);
    let step = step_agent(&mut a, &f.input(&b)).unwrap();

    let oracle = crate::tools::propose_operation(
        "Ada",
        &f.config.equipment[&2],
        "get tea",
        &SkillStore::new(),
        &[],
        &LlmCaller { backend_id: "x", backend: &b, log: &CallLog::new(), tick: 7, agent: None },
    )
    .unwrap();
    assert_eq!(
        step.action.kind,
        ActionKind::Use {
            equipment_id: 2,
            cell: Cell::new(2, 2),
            purpose: "get tea".into(),
            operation: oracle.operation.clone(),
        }
    );
    assert_eq!(step.proposal, Some(oracle));
}

#[test]
fn replan_verdict_drops_the_plan() {
    let b = ScriptedBackend::new(vec![ScriptRule::contains("[plan.assess]", "VERDICT: replan")], "ACTION: idle");
    let f = Fixture::new(Cell::new(8, 8));
    let mut a = agent(Cell::new(8, 8), "have tea");
    a.plan = Some(Plan::new("have tea", vec!["x".into()]));
    let step = step_agent(&mut a, &f.input(&b)).unwrap();
    assert_eq!(step.notes, vec![PlanNote::Replan]);
    assert!(a.plan.is_none());
}

#[test]
fn backend_errors_carry_the_agent() {
    struct Down;
    impl CompletionBackend for Down {
        fn complete(&self, _: &crate::backend::CompletionRequest) -> Result<String, BackendError> {
            Err(BackendError::Timeout { after_ms: 5 })
        }
    }
    let f = Fixture::new(Cell::new(8, 8));
    let mut a = agent(Cell::new(8, 8), "have tea");
    let err = step_agent(&mut a, &f.input(&Down)).unwrap_err();
    assert!(matches!(err, StepError::Backend { agent: AgentId(1), .. }));
}

#[test]
fn step_is_pure_in_its_inputs() {
    let f = Fixture::new(Cell::new(8, 8));
    let run = || {
        let b = scripted();
        let mut a = agent(Cell::new(8, 8), "have tea");
        let first = step_agent(&mut a, &f.input(&b)).unwrap();
        let second = step_agent(&mut a, &f.input(&b)).unwrap();
        (first, second, a, b.prompts())
    };
    let (x, y) = (run(), run());
    assert_eq!(x.0, y.0);
    assert_eq!(x.1, y.1);
    assert_eq!(x.2, y.2);
    assert_eq!(x.3, y.3);
}
