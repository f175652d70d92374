//! Core of a deterministic multi-agent town sandbox: world configuration,
//! agents with planning, memory and tool-use systems, language-model
//! backends, the tick engine and the task evaluation harness.

pub mod agent;
pub mod backend;
pub mod engine;
pub mod eval;
pub mod geom;
pub mod memory;
pub mod planning;
pub mod systems;
pub mod tools;
pub mod world;

pub use agent::{AgentAction, AgentId, AgentProfile, AgentState, AgentStatus, ActionKind};
pub use geom::{Cash, Cell, Tick};
