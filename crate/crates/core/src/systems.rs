//! Registry of pluggable planner and memory variants, addressed by the ids
//! stored in agent profiles.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::planning::{ChainPlanner, PlanningSystem};

pub const BASELINE_PLANNER: &str = "chain-planner";
pub const REACTIVE_PLANNER: &str = "reactive-planner";
pub const VECTOR_MEMORY: &str = "vector-memory";
pub const NO_MEMORY: &str = "no-memory";

/// Memories recalled per decision by the default memory variant.
pub const DEFAULT_RECALL_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryVariant {
    /// Records retrieved per decision; 0 disables retrieval.
    pub recall_k: usize,
}

#[derive(Clone)]
pub struct SystemsRegistry {
    planners: BTreeMap<String, Arc<dyn PlanningSystem>>,
    memories: BTreeMap<String, MemoryVariant>,
}

impl Default for SystemsRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl SystemsRegistry {
    pub fn empty() -> Self {
        Self {
            planners: BTreeMap::new(),
            memories: BTreeMap::new(),
        }
    }

    /// The stock variants.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register_planner(Arc::new(ChainPlanner::baseline()));
        r.register_planner(Arc::new(ChainPlanner::reactive()));
        r.register_memory(VECTOR_MEMORY, MemoryVariant { recall_k: DEFAULT_RECALL_K });
        r.register_memory(NO_MEMORY, MemoryVariant { recall_k: 0 });
        r
    }

    /// Adds or replaces a planner under its own id.
    pub fn register_planner(&mut self, planner: Arc<dyn PlanningSystem>) {
        self.planners.insert(planner.id().to_string(), planner);
    }

    pub fn register_memory(&mut self, id: impl Into<String>, variant: MemoryVariant) {
        self.memories.insert(id.into(), variant);
    }

    pub fn planner(&self, id: &str) -> Option<&Arc<dyn PlanningSystem>> {
        self.planners.get(id)
    }

    pub fn memory(&self, id: &str) -> Option<MemoryVariant> {
        self.memories.get(id).copied()
    }

    pub fn planner_ids(&self) -> impl Iterator<Item = &str> {
        self.planners.keys().map(String::as_str)
    }

    pub fn memory_ids(&self) -> impl Iterator<Item = &str> {
        self.memories.keys().map(String::as_str)
    }
}

impl std::fmt::Debug for SystemsRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SystemsRegistry")
            .field("planners", &self.planners.keys().collect::<Vec<_>>())
            .field("memories", &self.memories)
            .finish()
    }
}
