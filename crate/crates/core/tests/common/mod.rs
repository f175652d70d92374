#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use hamlet_core::backend::BackendRegistry;
use hamlet_core::eval::TaskSpec;
use hamlet_core::world::WorldConfig;

pub fn demo_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

pub fn config() -> WorldConfig {
    WorldConfig::load_dir(demo_dir()).expect("demo config loads")
}

pub fn backends() -> Arc<BackendRegistry> {
    let text = std::fs::read_to_string(demo_dir().join("backends.json")).unwrap();
    Arc::new(BackendRegistry::from_json(&text).expect("demo backends load"))
}

pub fn task(name: &str) -> TaskSpec {
    TaskSpec::load(demo_dir().join(name)).expect("demo task loads")
}
