use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geom::Cash;

pub const EQUIPMENT_FILE: &str = "equipment.json";
pub const ECONOMY_FILE: &str = "economy.json";
pub const BUILDINGS_FILE: &str = "buildings.json";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{document}: parse error at line {line}, column {column}: {message}")]
    Parse {
        document: &'static str,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{document}: entry {id} references unknown equipment id {equipment_id}")]
    Reference {
        document: &'static str,
        id: u32,
        equipment_id: u32,
    },
    #[error("{document}: duplicate id {id}")]
    DuplicateId { document: &'static str, id: u32 },
    #[error("{document}: entry {id} is invalid: {reason}")]
    Invalid {
        document: &'static str,
        id: u32,
        reason: String,
    },
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

/// An outcome text with its success flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub outcome: String,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportRule {
    /// Case-insensitive substring matched against the operation text.
    pub pattern: String,
    pub outcome: String,
    pub success: bool,
}

impl SupportRule {
    pub fn matches(&self, operation: &str) -> bool {
        operation
            .to_lowercase()
            .contains(&self.pattern.to_lowercase())
    }
}

/// The equipment's support function: a hard-coded rule table or a
/// language-model backed responder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum SupportSpec {
    #[serde(rename = "rules")]
    RuleTable {
        #[serde(default)]
        rules: Vec<SupportRule>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fallback: Option<Outcome>,
    },
    #[serde(rename = "model")]
    ModelBacked,
}

impl SupportSpec {
    /// First matching rule wins; otherwise the fallback. `None` for
    /// model-backed equipment or a rule table with no match and no fallback.
    pub fn evaluate_rules(&self, operation: &str) -> Option<Outcome> {
        match self {
            SupportSpec::RuleTable { rules, fallback } => rules
                .iter()
                .find(|r| r.matches(operation))
                .map(|r| Outcome {
                    outcome: r.outcome.clone(),
                    success: r.success,
                })
                .or_else(|| fallback.clone()),
            SupportSpec::ModelBacked => None,
        }
    }

    pub fn is_model_backed(&self) -> bool {
        matches!(self, SupportSpec::ModelBacked)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquipmentDef {
    pub id: u32,
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(rename = "function")]
    pub support: SupportSpec,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EconomyDef {
    /// The equipment this entry annotates.
    #[serde(rename = "id")]
    pub equipment_id: u32,
    #[serde(default)]
    pub menu: BTreeMap<String, Cash>,
    #[serde(default)]
    pub salary: Cash,
}

impl EconomyDef {
    pub fn price_of(&self, item: &str) -> Option<Cash> {
        self.menu.get(item).copied()
    }

    /// First menu item (in name order) mentioned in `text`, case-insensitively.
    pub fn item_named_in(&self, text: &str) -> Option<(&str, Cash)> {
        let lower = text.to_lowercase();
        self.menu
            .iter()
            .find(|(name, _)| lower.contains(&name.to_lowercase()))
            .map(|(name, price)| (name.as_str(), *price))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildingDef {
    pub assets: String,
    pub id: u32,
    #[serde(default)]
    pub price: Cash,
    #[serde(rename = "type")]
    pub kind: String,
    /// Occupancy grid, row-major; 1 = occupied.
    pub blocks: Vec<Vec<u8>>,
    /// Flat per-cell equipment ids aligned with `blocks` (row-major), 0 = none.
    #[serde(rename = "equipment", default)]
    pub equipment_slots: Vec<u32>,
}

impl BuildingDef {
    pub fn rows(&self) -> usize {
        self.blocks.len()
    }

    pub fn cols(&self) -> usize {
        self.blocks.first().map_or(0, Vec::len)
    }

    /// Occupied cells as `(col, row, equipment id or 0)`.
    pub fn occupied(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        let cols = self.cols();
        self.blocks.iter().enumerate().flat_map(move |(r, row)| {
            row.iter().enumerate().filter(|(_, v)| **v == 1).map(move |(c, _)| {
                let slot = self.equipment_slots.get(r * cols + c).copied().unwrap_or(0);
                (c, r, slot)
            })
        })
    }

    /// Equipment ids placed in this building, in row-major order.
    pub fn equipment_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.equipment_slots.iter().copied().filter(|id| *id != 0)
    }

    fn validate(&self) -> Result<(), String> {
        if self.kind.trim().is_empty() {
            return Err("type is empty".into());
        }
        let cols = self.cols();
        if self.blocks.is_empty() || cols == 0 {
            return Err("blocks must be non-empty".into());
        }
        if self.blocks.iter().any(|row| row.len() != cols) {
            return Err("blocks must be rectangular".into());
        }
        if self.blocks.iter().flatten().any(|v| *v > 1) {
            return Err("blocks may only contain 0 or 1".into());
        }
        if !self.equipment_slots.is_empty() {
            let cells = self.rows() * cols;
            if self.equipment_slots.len() != cells {
                return Err(format!(
                    "equipment has {} entries but blocks has {} cells",
                    self.equipment_slots.len(),
                    cells
                ));
            }
            for (i, id) in self.equipment_slots.iter().enumerate() {
                if *id != 0 && self.blocks[i / cols][i % cols] != 1 {
                    return Err(format!(
                        "equipment {id} sits on empty block (row {}, col {})",
                        i / cols,
                        i % cols
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A cross-validated set of equipment, economy and building definitions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub equipment: BTreeMap<u32, EquipmentDef>,
    pub economy: BTreeMap<u32, EconomyDef>,
    pub buildings: BTreeMap<u32, BuildingDef>,
}

const EQUIPMENT_FIELDS: &[&str] = &["id", "type", "function", "description"];
const ECONOMY_FIELDS: &[&str] = &["id", "menu", "salary"];
const BUILDING_FIELDS: &[&str] = &["assets", "id", "price", "type", "blocks", "equipment"];

impl WorldConfig {
    /// Parse and cross-validate the three world documents.
    pub fn load(
        equipment_text: &str,
        economy_text: &str,
        buildings_text: &str,
    ) -> Result<Self, ConfigError> {
        let equipment_list: Vec<EquipmentDef> =
            parse_document(EQUIPMENT_FILE, equipment_text, EQUIPMENT_FIELDS)?;
        let economy_list: Vec<EconomyDef> =
            parse_document(ECONOMY_FILE, economy_text, ECONOMY_FIELDS)?;
        let building_list: Vec<BuildingDef> =
            parse_document(BUILDINGS_FILE, buildings_text, BUILDING_FIELDS)?;
        Self::from_parts(equipment_list, economy_list, building_list)
    }

    /// Load `equipment.json`, `economy.json` and `buildings.json` from a directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| ConfigError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        };
        Self::load(
            &read(EQUIPMENT_FILE)?,
            &read(ECONOMY_FILE)?,
            &read(BUILDINGS_FILE)?,
        )
    }

    pub fn from_parts(
        equipment_list: Vec<EquipmentDef>,
        economy_list: Vec<EconomyDef>,
        building_list: Vec<BuildingDef>,
    ) -> Result<Self, ConfigError> {
        let mut cfg = WorldConfig::default();

        for eq in equipment_list {
            let invalid = |reason: &str| ConfigError::Invalid {
                document: EQUIPMENT_FILE,
                id: eq.id,
                reason: reason.to_string(),
            };
            if eq.id == 0 {
                return Err(invalid("id must be positive"));
            }
            if eq.kind.trim().is_empty() {
                return Err(invalid("type is empty"));
            }
            if eq.description.trim().is_empty() {
                return Err(invalid("description is empty"));
            }
            if let SupportSpec::RuleTable { rules, fallback } = &eq.support {
                if rules.is_empty() && fallback.is_none() {
                    return Err(invalid("rule table needs at least one rule or a fallback"));
                }
            }
            if cfg.equipment.contains_key(&eq.id) {
                return Err(ConfigError::DuplicateId {
                    document: EQUIPMENT_FILE,
                    id: eq.id,
                });
            }
            cfg.equipment.insert(eq.id, eq);
        }

        for econ in economy_list {
            if !cfg.equipment.contains_key(&econ.equipment_id) {
                return Err(ConfigError::Reference {
                    document: ECONOMY_FILE,
                    id: econ.equipment_id,
                    equipment_id: econ.equipment_id,
                });
            }
            if cfg.economy.contains_key(&econ.equipment_id) {
                return Err(ConfigError::DuplicateId {
                    document: ECONOMY_FILE,
                    id: econ.equipment_id,
                });
            }
            cfg.economy.insert(econ.equipment_id, econ);
        }

        for b in building_list {
            if b.id == 0 {
                return Err(ConfigError::Invalid {
                    document: BUILDINGS_FILE,
                    id: b.id,
                    reason: "id must be positive".into(),
                });
            }
            b.validate().map_err(|reason| ConfigError::Invalid {
                document: BUILDINGS_FILE,
                id: b.id,
                reason,
            })?;
            if let Some(missing) = b.equipment_ids().find(|id| !cfg.equipment.contains_key(id)) {
                return Err(ConfigError::Reference {
                    document: BUILDINGS_FILE,
                    id: b.id,
                    equipment_id: missing,
                });
            }
            if cfg.buildings.contains_key(&b.id) {
                return Err(ConfigError::DuplicateId {
                    document: BUILDINGS_FILE,
                    id: b.id,
                });
            }
            cfg.buildings.insert(b.id, b);
        }

        Ok(cfg)
    }

    /// Serialize back into the three external documents
    /// (equipment, economy, buildings).
    pub fn to_documents(&self) -> (String, String, String) {
        let dump = |v: Value| serde_json::to_string_pretty(&v).expect("config serializes");
        (
            dump(serde_json::json!(self.equipment.values().collect::<Vec<_>>())),
            dump(serde_json::json!(self.economy.values().collect::<Vec<_>>())),
            dump(serde_json::json!(self.buildings.values().collect::<Vec<_>>())),
        )
    }

    pub fn is_empty(&self) -> bool {
        self.equipment.is_empty() && self.economy.is_empty() && self.buildings.is_empty()
    }

    pub fn building_kinds(&self) -> BTreeSet<&str> {
        self.buildings.values().map(|b| b.kind.as_str()).collect()
    }
}

fn parse_document<T: DeserializeOwned>(
    document: &'static str,
    text: &str,
    known_fields: &[&str],
) -> Result<Vec<T>, ConfigError> {
    let to_err = |e: serde_json::Error| ConfigError::Parse {
        document,
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let raw: Value = serde_json::from_str(text).map_err(to_err)?;
    if let Value::Array(items) = &raw {
        for (i, item) in items.iter().enumerate() {
            if let Value::Object(obj) = item {
                for key in obj.keys().filter(|k| !known_fields.contains(&k.as_str())) {
                    log::warn!("{document}: ignoring unknown field `{key}` in entry {i}");
                }
            }
        }
    }
    serde_json::from_str(text).map_err(to_err)
}
