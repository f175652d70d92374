use super::modules::parse_cell;
use super::{Decision, Plan, PlanContext};
use crate::agent::{ActionKind, AgentAction, AgentStatus};
use crate::geom::Cell;

/// Nearest candidate by Manhattan distance. An in-progress movement target
/// is kept if it is still a candidate; remaining ties are broken by the
/// seeded draw over row-major order.
fn choose(mut candidates: Vec<Cell>, from: Cell, sticky: Option<Cell>, tie_break: u64) -> Option<Cell> {
    if let Some(s) = sticky.filter(|s| candidates.contains(s)) {
        return Some(s);
    }
    let best = candidates.iter().map(|c| c.manhattan(from)).min()?;
    candidates.retain(|c| c.manhattan(from) == best);
    candidates.sort_by_key(|c| c.row_major());
    candidates.dedup();
    let pick = (tie_break % candidates.len() as u64) as usize;
    Some(candidates[pick])
}

fn place_candidates(name: &str, ctx: &PlanContext<'_>) -> Vec<Cell> {
    let obs = ctx.observation;
    let eq: Vec<Cell> = obs
        .equipment
        .iter()
        .filter(|e| e.kind.eq_ignore_ascii_case(name))
        .map(|e| e.cell)
        .collect();
    if !eq.is_empty() {
        return eq;
    }
    let buildings: Vec<Cell> = obs
        .buildings
        .iter()
        .filter(|b| b.kind.eq_ignore_ascii_case(name))
        .flat_map(|b| b.targets.iter().copied())
        .collect();
    if !buildings.is_empty() {
        return buildings;
    }
    obs.agents
        .iter()
        .filter(|a| a.name.eq_ignore_ascii_case(name))
        .map(|a| a.location)
        .collect()
}

/// Turn a parsed decision into a concrete action against the observed
/// world. Returns `None` when the decision names nothing that exists.
pub fn resolve_decision(decision: &Decision, plan: &Plan, ctx: &PlanContext<'_>) -> Option<AgentAction> {
    let obs = ctx.observation;
    let here = obs.position;
    let sticky = match ctx.status {
        AgentStatus::Moving { target } => Some(*target),
        _ => None,
    };
    let approach = |target: Cell| ActionKind::Move { target, en_route: true };
    let kind = match decision {
        Decision::Idle => ActionKind::Idle,
        Decision::Move(target) => {
            let target = match parse_cell(target) {
                Some(cell) => cell,
                None => choose(place_candidates(target, ctx), here, sticky, ctx.tie_break)?,
            };
            ActionKind::Move { target, en_route: false }
        }
        Decision::Use { equipment, purpose } => {
            let cells = obs
                .equipment
                .iter()
                .filter(|e| e.kind.eq_ignore_ascii_case(equipment))
                .map(|e| e.cell)
                .collect();
            let cell = choose(cells, here, sticky, ctx.tie_break)?;
            if !here.is_adjacent(cell) {
                approach(cell)
            } else {
                let seen = obs.equipment.iter().find(|e| e.cell == cell)?;
                let purpose = purpose
                    .clone()
                    .or_else(|| plan.current().map(str::to_string))
                    .unwrap_or_else(|| seen.kind.clone());
                ActionKind::Use {
                    equipment_id: seen.equipment_id,
                    cell,
                    operation: purpose.clone(),
                    purpose,
                }
            }
        }
        Decision::Say { peer, utterance } => {
            let seen = obs.agents.iter().find(|a| a.name.eq_ignore_ascii_case(peer))?;
            if obs.mayor || here.is_adjacent(seen.location) {
                ActionKind::Say {
                    peer: seen.id,
                    utterance: utterance.clone(),
                }
            } else {
                approach(seen.location)
            }
        }
        Decision::Build { building_id, origin } => {
            if !obs.mayor || !obs.buildable.iter().any(|(id, _)| id == building_id) {
                return None;
            }
            ActionKind::Build {
                building_id: *building_id,
                origin: *origin,
            }
        }
    };
    Some(AgentAction { kind, issued_tick: ctx.tick })
}
