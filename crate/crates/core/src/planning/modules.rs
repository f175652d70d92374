use super::{PlanContext, Verdict};
use crate::geom::Cell;

/// One pluggable step of the planning chain: renders a prompt from the
/// context and parses the model's reply. `render` must be deterministic;
/// `parse` returns `None` when the reply does not follow the convention.
pub trait PromptModule: Send + Sync {
    type Output;

    fn name(&self) -> &str;
    fn render(&self, ctx: &PlanContext<'_>) -> String;
    fn parse(&self, response: &str) -> Option<Self::Output>;
}

/// Values of `PREFIX:` lines, prefix matched case-insensitively.
fn tagged_lines<'a>(response: &'a str, prefix: &'a str) -> impl Iterator<Item = &'a str> + 'a {
    response.lines().filter_map(move |line| {
        let line = line.trim();
        let head = line.get(..prefix.len())?;
        head.eq_ignore_ascii_case(prefix)
            .then(|| line[prefix.len()..].trim())
    })
}

pub struct DecomposeModule;

impl PromptModule for DecomposeModule {
    type Output = Vec<String>;

    fn name(&self) -> &str {
        "plan.decompose"
    }

    fn render(&self, ctx: &PlanContext<'_>) -> String {
        let mut out = String::from("[plan.decompose]\n");
        ctx.render_preamble(&mut out);
        out.push_str(
            "Break the goal into concrete subtasks, in order. \
             Reply with one line per subtask: `SUBTASK: <text>`.\n",
        );
        out
    }

    fn parse(&self, response: &str) -> Option<Vec<String>> {
        let subtasks: Vec<String> = tagged_lines(response, "SUBTASK:")
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        (!subtasks.is_empty()).then_some(subtasks)
    }
}

pub struct AssessModule;

impl PromptModule for AssessModule {
    type Output = Verdict;

    fn name(&self) -> &str {
        "plan.assess"
    }

    fn render(&self, ctx: &PlanContext<'_>) -> String {
        let mut out = String::from("[plan.assess]\n");
        ctx.render_preamble(&mut out);
        ctx.render_plan(&mut out);
        out.push_str(
            "Judge progress toward the goal. \
             Reply with `VERDICT: achieved`, `VERDICT: continue` or `VERDICT: replan`.\n",
        );
        out
    }

    fn parse(&self, response: &str) -> Option<Verdict> {
        tagged_lines(response, "VERDICT:").find_map(|v| {
            match v.split_whitespace().next()?.to_ascii_lowercase().as_str() {
                "achieved" => Some(Verdict::Achieved),
                "continue" => Some(Verdict::Continue),
                "replan" => Some(Verdict::Replan),
                _ => None,
            }
        })
    }
}

/// A parsed decision, before names are resolved against the world.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    /// Target is a place name (equipment kind, building kind, person) or `x,y`.
    Move(String),
    Say { peer: String, utterance: String },
    /// Equipment kind, with an optional purpose overriding the subtask text.
    Use { equipment: String, purpose: Option<String> },
    Build { building_id: u32, origin: Cell },
    Idle,
}

impl Decision {
    pub fn parse_line(body: &str) -> Option<Decision> {
        let body = body.trim();
        let (verb, rest) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
        let rest = rest.trim();
        let split_bar = |s: &str| match s.split_once('|') {
            Some((a, b)) => (a.trim().to_string(), Some(b.trim().to_string())),
            None => (s.trim().to_string(), None),
        };
        match verb.to_ascii_lowercase().as_str() {
            "idle" => Some(Decision::Idle),
            "move" if !rest.is_empty() => Some(Decision::Move(rest.to_string())),
            "use" if !rest.is_empty() => {
                let (equipment, purpose) = split_bar(rest);
                Some(Decision::Use {
                    equipment,
                    purpose: purpose.filter(|p| !p.is_empty()),
                })
            }
            "say" => {
                let (peer, utterance) = split_bar(rest);
                let utterance = utterance.filter(|u| !u.is_empty())?;
                (!peer.is_empty()).then_some(Decision::Say { peer, utterance })
            }
            "build" => {
                let mut parts = rest.split_whitespace();
                let building_id = parts.next()?.parse().ok()?;
                let origin = parse_cell(parts.next()?)?;
                Some(Decision::Build { building_id, origin })
            }
            _ => None,
        }
    }
}

pub(crate) fn parse_cell(s: &str) -> Option<Cell> {
    let (x, y) = s.trim().split_once(',')?;
    Some(Cell::new(x.trim().parse().ok()?, y.trim().parse().ok()?))
}

pub struct DecideModule;

impl PromptModule for DecideModule {
    type Output = Decision;

    fn name(&self) -> &str {
        "plan.decide"
    }

    fn render(&self, ctx: &PlanContext<'_>) -> String {
        let mut out = String::from("[plan.decide]\n");
        ctx.render_preamble(&mut out);
        ctx.render_plan(&mut out);
        out.push_str(
            "Choose one action for the current subtask. Reply with one line:\n\
             `ACTION: move <place or x,y>` | `ACTION: use <equipment>` | \
             `ACTION: say <person> | <words>` | `ACTION: idle`",
        );
        if ctx.observation.mayor {
            out.push_str(" | `ACTION: build <building id> <x>,<y>`");
        }
        out.push('\n');
        out
    }

    fn parse(&self, response: &str) -> Option<Decision> {
        tagged_lines(response, "ACTION:").find_map(Decision::parse_line)
    }
}
