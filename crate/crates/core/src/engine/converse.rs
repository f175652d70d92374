use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentProfile, Peer};
use crate::backend::{BackendError, LlmCaller};
use crate::geom::Tick;

pub const DEFAULT_MAX_TURNS: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Peer,
    pub utterance: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversationEnd {
    /// A participant replied `END`.
    Finished,
    MaxTurns,
    /// A reply could not be obtained.
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub participants: (Peer, Peer),
    pub turns: Vec<Turn>,
    pub max_turns: u32,
    pub end: ConversationEnd,
}

/// A participant able to produce replies.
pub(crate) struct Speaker<'a> {
    pub profile: &'a AgentProfile,
    pub caller: LlmCaller<'a>,
    /// Retrieved memories about the partner, best first.
    pub memories: Vec<(Tick, String)>,
}

pub(crate) enum Reply {
    Say(String),
    End,
}

pub(crate) fn parse_reply(response: &str) -> Reply {
    for line in response.lines().map(str::trim) {
        if line.get(..4).is_some_and(|h| h.eq_ignore_ascii_case("SAY:")) {
            let said = line[4..].trim();
            if !said.is_empty() {
                return Reply::Say(said.to_string());
            }
        }
        if line.get(..3).is_some_and(|h| h.eq_ignore_ascii_case("END")) {
            return Reply::End;
        }
    }
    Reply::End
}

pub(crate) fn render_prompt(speaker: &Speaker<'_>, partner: &str, transcript: &[(&str, &str)]) -> String {
    let p = speaker.profile;
    let mut out = String::from("[converse]\n");
    let _ = writeln!(out, "AGENT: {}", p.name);
    if !p.bio.is_empty() {
        let _ = writeln!(out, "BIO: {}", p.bio);
    }
    let _ = writeln!(out, "GOAL: {}", p.goal);
    let _ = writeln!(out, "PARTNER: {partner}");
    if !speaker.memories.is_empty() {
        out.push_str("MEMORIES:\n");
        for (tick, text) in &speaker.memories {
            let _ = writeln!(out, "- (t{tick}) {text}");
        }
    }
    out.push_str("TRANSCRIPT:\n");
    for (who, said) in transcript {
        let _ = writeln!(out, "- {who}: {said}");
    }
    let _ = writeln!(out, "TURN: {}", transcript.len() + 1);
    out.push_str("Reply with `SAY: <words>` to continue or `END` to finish.\n");
    out
}

/// One side of a conversation. Sides without a speaker (a human mayor)
/// never reply; reaching their turn ends the exchange.
pub(crate) struct Side<'a> {
    pub peer: Peer,
    pub name: &'a str,
    pub speaker: Option<&'a Speaker<'a>>,
}

/// Alternate replies after `a`'s opener until a reply is `END`, `max_turns`
/// is reached, or a backend call fails.
pub(crate) fn run_conversation(
    a: &Side<'_>,
    b: &Side<'_>,
    opener: &str,
    max_turns: u32,
    on_error: &mut dyn FnMut(&BackendError),
) -> Conversation {
    let mut turns = vec![Turn { speaker: a.peer, utterance: opener.to_string() }];
    let mut end = ConversationEnd::MaxTurns;
    while (turns.len() as u32) < max_turns {
        let (side, other) = if turns.len() % 2 == 0 { (a, b) } else { (b, a) };
        let Some(speaker) = side.speaker else {
            end = ConversationEnd::Finished;
            break;
        };
        let transcript: Vec<(&str, &str)> = turns
            .iter()
            .map(|t| (if t.speaker == a.peer { a.name } else { b.name }, t.utterance.as_str()))
            .collect();
        let prompt = render_prompt(speaker, other.name, &transcript);
        match speaker.caller.ask("converse", &prompt) {
            Ok(response) => match parse_reply(&response) {
                Reply::Say(text) => turns.push(Turn { speaker: side.peer, utterance: text }),
                Reply::End => {
                    end = ConversationEnd::Finished;
                    break;
                }
            },
            Err(e) => {
                on_error(&e);
                end = ConversationEnd::BackendError;
                break;
            }
        }
    }
    Conversation {
        participants: (a.peer, b.peer),
        turns,
        max_turns,
        end,
    }
}
