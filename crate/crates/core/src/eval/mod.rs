//! Task-based evaluation: goal predicates, episodes and pass-rate reports.

mod predicate;
mod task;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub use predicate::{evaluate_predicate, evaluate_predicate_at, json_subset, GoalPredicate, PredicateError};
pub use task::{PlacementSpec, Role, SubjectMode, TaskAgent, TaskSpec, TaskWorld};

use crate::backend::{BackendRegistry, CallLog};
use crate::engine::{Command, Engine, EngineSettings, Event, EventKind, SimState};
use crate::geom::Tick;
use crate::systems::SystemsRegistry;
use crate::world::{ConfigError, WorldConfig, WorldMap};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid task: {0}")]
    Task(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("episode setup failed: {0}")]
    Setup(String),
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    #[error("writing log: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task_id: String,
    pub seed: u64,
    pub passed: bool,
    pub ticks_used: Tick,
    pub backend_calls: u64,
    pub calls_by_tag: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<String>,
}

/// A finished episode with its full log and final state.
#[derive(Debug, Clone)]
pub struct Episode {
    pub result: EpisodeResult,
    pub events: Vec<Event>,
    pub state: SimState,
    pub calls: CallLog,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the subject's backend.
    pub subject_backend: Option<String>,
    /// Replaces the task's seeds with `base, base+1, ...`.
    pub seed_base: Option<u64>,
    /// Worker threads for episodes; 0 or 1 runs them sequentially.
    pub parallel: usize,
    /// Directory receiving one JSONL log per episode.
    pub log_dir: Option<PathBuf>,
    pub systems: Option<Arc<SystemsRegistry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRateReport {
    pub task_id: String,
    pub pass_rate: f64,
    pub passes: u32,
    pub episode_count: u32,
    pub episodes: Vec<EpisodeResult>,
    pub backend_calls_total: u64,
    pub calls_by_tag: BTreeMap<String, u64>,
}

/// Build the world, spawn the agents (tick 0) and queue the task's timed
/// commands, without running any ticks.
pub fn prepare_episode(
    task: &TaskSpec,
    config: &WorldConfig,
    seed: u64,
    engine: &Engine,
    opts: &RunOptions,
) -> Result<(SimState, Vec<Event>), EvalError> {
    let settings = EngineSettings {
        support_backend: task.support_backend.clone(),
        max_turns: task.max_turns.unwrap_or(EngineSettings::default().max_turns),
        ..EngineSettings::default()
    };
    let map = WorldMap::new(task.world.width, task.world.height);
    let mut state = SimState::new(config.clone(), map, seed, settings);
    let mut events = Vec::new();
    let mut setup = Vec::new();
    for p in &task.world.placements {
        setup.push(Command::CreateBuilding { building_id: p.building_id, origin: p.origin });
    }
    for a in &task.agents {
        let mut profile = a.profile.clone();
        let subject = a.role == Role::Subject;
        if subject {
            if let Some(b) = &opts.subject_backend {
                profile.backend_id = b.clone();
            }
        }
        setup.push(Command::CreateAgent {
            profile,
            spawn: a.spawn,
            mayor: subject && task.subject_mode == SubjectMode::Mayor,
        });
    }
    for cmd in setup {
        let out = engine.apply_now(&mut state, cmd);
        if let Some(rejected) = out.iter().find(|e| e.kind == EventKind::CommandRejected) {
            return Err(EvalError::Setup(rejected.payload["reason"].as_str().unwrap_or("").to_string()));
        }
        events.extend(out);
    }
    for sc in &task.commands {
        engine.schedule_at(&mut state, sc.applies_at_tick, sc.command.clone());
    }
    Ok((state, events))
}

/// Run one episode until the goal holds or the budget is spent.
pub fn run_episode(
    task: &TaskSpec,
    config: &WorldConfig,
    seed: u64,
    backends: Arc<BackendRegistry>,
    opts: &RunOptions,
) -> Result<Episode, EvalError> {
    let mut engine = Engine::new(backends).with_call_log(CallLog::new());
    if let Some(systems) = &opts.systems {
        engine = engine.with_systems(systems.clone());
    }
    let (mut state, mut events) = prepare_episode(task, config, seed, &engine, opts)?;
    let mut passed = evaluate_predicate(&task.goal, &state, &events)?;
    let mut ticks_used = 0;
    while !passed && ticks_used < task.tick_budget {
        events.extend(engine.tick(&mut state));
        ticks_used += 1;
        passed = evaluate_predicate(&task.goal, &state, &events)?;
    }
    let end = engine.end_episode(&mut state, json!({"passed": passed, "ticks_used": ticks_used, "seed": seed}));
    events.push(end);

    let calls = engine.calls().clone();
    let mut result = EpisodeResult {
        task_id: task.task_id.clone(),
        seed,
        passed,
        ticks_used,
        backend_calls: calls.len() as u64,
        calls_by_tag: calls.count_by_tag(),
        log: None,
    };
    if let Some(dir) = &opts.log_dir {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}-{seed}.jsonl", task.task_id));
        let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
        crate::engine::write_jsonl(&events, file)?;
        result.log = Some(path.display().to_string());
    }
    Ok(Episode { result, events, state, calls })
}

/// Run every episode and aggregate. Results are reported in seed order
/// whatever the execution order.
pub fn run_task(
    task: &TaskSpec,
    config: &WorldConfig,
    backends: Arc<BackendRegistry>,
    opts: &RunOptions,
) -> Result<PassRateReport, EvalError> {
    task.validate()?;
    let seeds: Vec<u64> = match opts.seed_base {
        Some(base) => (0..u64::from(task.episodes)).map(|i| base + i).collect(),
        None => task.seeds.clone(),
    };
    let one = |seed: &u64| run_episode(task, config, *seed, backends.clone(), opts).map(|e| e.result);
    let results: Vec<EpisodeResult> = if opts.parallel > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallel)
            .build()
            .map_err(|e| EvalError::Setup(e.to_string()))?;
        pool.install(|| seeds.par_iter().map(one).collect::<Result<_, _>>())?
    } else {
        seeds.iter().map(one).collect::<Result<_, _>>()?
    };
    Ok(aggregate(&task.task_id, results))
}

pub fn aggregate(task_id: &str, episodes: Vec<EpisodeResult>) -> PassRateReport {
    let passes = episodes.iter().filter(|e| e.passed).count() as u32;
    let n = episodes.len() as u32;
    let mut calls_by_tag = BTreeMap::new();
    for e in &episodes {
        for (tag, c) in &e.calls_by_tag {
            *calls_by_tag.entry(tag.clone()).or_insert(0) += c;
        }
    }
    PassRateReport {
        task_id: task_id.to_string(),
        pass_rate: if n == 0 { 0.0 } else { f64::from(passes) / f64::from(n) },
        passes,
        episode_count: n,
        backend_calls_total: episodes.iter().map(|e| e.backend_calls).sum(),
        calls_by_tag,
        episodes,
    }
}
