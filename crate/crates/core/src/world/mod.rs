//! The configured physical and economic world: equipment, economy and
//! building definitions loaded from JSON, plus the placement map.

mod config;
mod map;

pub use config::{
    BuildingDef, ConfigError, EconomyDef, EquipmentDef, Outcome, SupportRule, SupportSpec,
    WorldConfig, BUILDINGS_FILE, ECONOMY_FILE, EQUIPMENT_FILE,
};
pub use map::{EquipmentInstance, Occupant, Placement, PlacementError, WorldMap};
