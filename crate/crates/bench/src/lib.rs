//! Fixtures shared by the benchmarks.

use std::path::PathBuf;
use std::sync::Arc;

use hamlet_core::backend::{BackendRegistry, HashingEmbedder};
use hamlet_core::engine::{Engine, SimState};
use hamlet_core::eval::{prepare_episode, RunOptions, TaskSpec};
use hamlet_core::memory::MemoryStore;
use hamlet_core::world::WorldConfig;
use hamlet_core::AgentId;

pub fn demo_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

pub fn config() -> WorldConfig {
    WorldConfig::load_dir(demo_dir()).expect("demo config")
}

pub fn backends() -> Arc<BackendRegistry> {
    let text = std::fs::read_to_string(demo_dir().join("backends.json")).expect("demo backends");
    Arc::new(BackendRegistry::from_json(&text).expect("demo backends parse"))
}

pub fn task(name: &str) -> TaskSpec {
    TaskSpec::load(demo_dir().join(name)).expect("demo task")
}

/// The demo town ready for tick 1.
pub fn town() -> (Engine, SimState) {
    let t = task("town.task.json");
    let engine = Engine::new(backends());
    let (state, _) = prepare_episode(&t, &config(), t.seeds[0], &engine, &RunOptions::default()).expect("town");
    (engine, state)
}

const WORDS: &[&str] = &["ada", "bob", "store", "chicken", "tea", "stove", "office", "work", "mayor", "house", "park"];

/// `n` memories for agent 1 built from a small vocabulary.
pub fn filled_store(n: usize) -> MemoryStore {
    let e = HashingEmbedder::default();
    let mut store = MemoryStore::new(64);
    let mut x: u64 = 0x9e37_79b9_7f4a_7c15;
    for i in 0..n {
        let words: Vec<&str> = (0..4)
            .map(|_| {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                WORDS[(x % WORDS.len() as u64) as usize]
            })
            .collect();
        store.store(AgentId(1), &words.join(" "), i as u64, &e).expect("store");
    }
    store
}
