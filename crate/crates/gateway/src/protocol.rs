//! Wire envelopes and the message catalog.

use std::collections::BTreeSet;

use hamlet_core::engine::{Command, Event};
use hamlet_core::{AgentId, AgentProfile, Cell, Tick};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// One JSON text frame. Client requests carry a `msg_id`; the reply echoes
/// it. Server pushes have none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msg_id: Option<String>,
    pub kind: String,
    #[serde(default)]
    pub payload: Value,
}

impl Envelope {
    pub fn request(msg_id: impl Into<String>, kind: impl Into<String>, payload: Value) -> Self {
        Self { msg_id: Some(msg_id.into()), kind: kind.into(), payload }
    }

    pub fn ack(msg_id: Option<String>, payload: Value) -> Self {
        Self { msg_id, kind: "ack".into(), payload }
    }

    pub fn error(msg_id: Option<String>, code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            msg_id,
            kind: "error".into(),
            payload: json!({"code": code, "message": message.into()}),
        }
    }

    pub fn event(event: &Event) -> Self {
        Self { msg_id: None, kind: "event".into(), payload: serde_json::to_value(event).expect("events serialize") }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("envelopes serialize")
    }

    pub fn is_ack(&self) -> bool {
        self.kind == "ack"
    }

    /// The `code` of an error reply.
    pub fn error_code(&self) -> Option<ErrorCode> {
        (self.kind == "error")
            .then(|| serde_json::from_value(self.payload["code"].clone()).ok())
            .flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Missing or wrong token, or a command before `hello`.
    Auth,
    /// The session's role may not send this kind.
    Role,
    /// The command is well formed but the world refuses it.
    Validation,
    /// Malformed envelope or payload.
    BadRequest,
    UnknownKind,
    /// The request conflicts with gateway state (mayor seat taken, not paused).
    Conflict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Observer,
    Mayor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    /// Every engine event, in (tick, seq) order.
    Events,
    /// A state document after every tick.
    State,
}

/// A parsed client request.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Request {
    Hello {
        #[serde(default)]
        token: Option<String>,
        #[serde(default = "observer")]
        role: Role,
    },
    CreateAgent {
        profile: AgentProfile,
        spawn: Cell,
    },
    CreateBuilding {
        building_id: u32,
        origin: Cell,
    },
    MayorSay {
        target_agent: AgentId,
        text: String,
    },
    Pause,
    Resume,
    SetSpeed {
        ticks_per_sec: f64,
    },
    /// Run ticks by hand while paused.
    Step {
        #[serde(default = "one")]
        ticks: u64,
    },
    Snapshot,
    Subscribe {
        streams: BTreeSet<Stream>,
    },
    Unsubscribe {
        streams: BTreeSet<Stream>,
    },
    /// Replay logged events after the given position, then keep streaming.
    ResumeFrom {
        tick: Tick,
        seq: u64,
    },
}

fn observer() -> Role {
    Role::Observer
}

fn one() -> u64 {
    1
}

impl Request {
    pub fn parse(envelope: &Envelope) -> Result<Self, (ErrorCode, String)> {
        if !KINDS.contains(&envelope.kind.as_str()) {
            return Err((ErrorCode::UnknownKind, format!("unknown kind {:?}", envelope.kind)));
        }
        // Unit kinds take no payload; the rest treat a missing one as `{}`.
        let unit = matches!(envelope.kind.as_str(), "pause" | "resume" | "snapshot");
        let tagged = match &envelope.payload {
            Value::Null if !unit => json!({"kind": envelope.kind, "payload": {}}),
            Value::Object(m) if unit && m.is_empty() => json!({"kind": envelope.kind}),
            Value::Null => json!({"kind": envelope.kind}),
            p => json!({"kind": envelope.kind, "payload": p}),
        };
        serde_json::from_value(tagged).map_err(|e| (ErrorCode::BadRequest, format!("{}: {e}", envelope.kind)))
    }

    /// The engine command this request queues, if any.
    pub fn command(&self) -> Option<Command> {
        Some(match self.clone() {
            Request::CreateAgent { profile, spawn } => Command::CreateAgent { profile, spawn, mayor: false },
            Request::CreateBuilding { building_id, origin } => Command::CreateBuilding { building_id, origin },
            Request::MayorSay { target_agent, text } => Command::MayorSay { target_agent, text },
            _ => return None,
        })
    }
}

/// Every request kind a client may send.
pub const KINDS: &[&str] = &[
    "hello",
    "create_agent",
    "create_building",
    "mayor_say",
    "pause",
    "resume",
    "set_speed",
    "step",
    "snapshot",
    "subscribe",
    "unsubscribe",
    "resume_from",
];

/// JSON schemas for every envelope kind, requests and server messages.
pub fn catalog() -> Value {
    let cell = json!({"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2});
    let streams = json!({"type": "array", "items": {"enum": ["events", "state"]}});
    let empty = json!({"type": "object", "maxProperties": 0});
    let obj = |props: Value, required: &[&str]| {
        json!({"type": "object", "properties": props, "required": required})
    };
    json!({
        "envelope": obj(
            json!({"msg_id": {"type": "string"}, "kind": {"type": "string"}, "payload": {}}),
            &["kind"],
        ),
        "requests": {
            "hello": obj(json!({"token": {"type": "string"}, "role": {"enum": ["observer", "mayor"]}}), &[]),
            "create_agent": obj(json!({
                "profile": obj(json!({
                    "name": {"type": "string"}, "bio": {"type": "string"}, "goal": {"type": "string"},
                    "backend_id": {"type": "string"}, "memory_system_id": {"type": "string"},
                    "plan_system_id": {"type": "string"},
                    "owned_buildings": {"type": "array", "items": {"type": "integer"}},
                    "starting_cash": {"type": "integer", "minimum": 0}
                }), &["name", "backend_id"]),
                "spawn": cell
            }), &["profile", "spawn"]),
            "create_building": obj(json!({"building_id": {"type": "integer"}, "origin": cell}), &["building_id", "origin"]),
            "mayor_say": obj(json!({"target_agent": {"type": "integer"}, "text": {"type": "string"}}), &["target_agent", "text"]),
            "pause": empty,
            "resume": empty,
            "set_speed": obj(json!({"ticks_per_sec": {"type": "number", "exclusiveMinimum": 0}}), &["ticks_per_sec"]),
            "step": obj(json!({"ticks": {"type": "integer", "minimum": 1}}), &[]),
            "snapshot": empty,
            "subscribe": obj(json!({"streams": streams}), &["streams"]),
            "unsubscribe": obj(json!({"streams": streams}), &["streams"]),
            "resume_from": obj(json!({"tick": {"type": "integer"}, "seq": {"type": "integer"}}), &["tick", "seq"])
        },
        "server": {
            "ack": {"type": "object", "description": "success reply; command kinds carry applies_at_tick"},
            "error": obj(json!({
                "code": {"enum": ["auth", "role", "validation", "bad_request", "unknown_kind", "conflict"]},
                "message": {"type": "string"}
            }), &["code", "message"]),
            "event": obj(json!({
                "tick": {"type": "integer"}, "seq": {"type": "integer"}, "actor": {},
                "kind": {"type": "string"}, "payload": {"type": "object"}
            }), &["tick", "seq", "actor", "kind", "payload"]),
            "state": obj(json!({
                "tick": {"type": "integer"}, "paused": {"type": "boolean"},
                "ticks_per_sec": {"type": "number"}, "map": {"type": "object"},
                "agents": {"type": "array"}
            }), &["tick", "map", "agents"])
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_kind() {
        let samples = [
            ("hello", json!({"token": "t", "role": "mayor"})),
            ("create_agent", json!({"profile": {"name": "Ada", "backend_id": "s"}, "spawn": [1, 2]})),
            ("create_building", json!({"building_id": 1, "origin": [3, 3]})),
            ("mayor_say", json!({"target_agent": 1, "text": "hi"})),
            ("pause", Value::Null),
            ("resume", json!({})),
            ("set_speed", json!({"ticks_per_sec": 4.0})),
            ("step", json!({})),
            ("snapshot", Value::Null),
            ("subscribe", json!({"streams": ["events"]})),
            ("unsubscribe", json!({"streams": ["state"]})),
            ("resume_from", json!({"tick": 3, "seq": 10})),
        ];
        assert_eq!(samples.len(), KINDS.len());
        for (kind, payload) in samples {
            let r = Request::parse(&Envelope::request("1", kind, payload));
            assert!(r.is_ok(), "{kind}: {r:?}");
        }
        assert_eq!(Request::parse(&Envelope::request("1", "step", Value::Null)), Ok(Request::Step { ticks: 1 }));
    }

    #[test]
    fn catalog_covers_every_kind() {
        let c = catalog();
        let documented: BTreeSet<&str> = c["requests"].as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(documented, KINDS.iter().copied().collect());
    }

    #[test]
    fn bad_requests() {
        let e = Request::parse(&Envelope::request("1", "teleport", Value::Null)).unwrap_err();
        assert_eq!(e.0, ErrorCode::UnknownKind);
        let e = Request::parse(&Envelope::request("1", "mayor_say", json!({"text": 3}))).unwrap_err();
        assert_eq!(e.0, ErrorCode::BadRequest);
    }

    #[test]
    fn error_envelope_shape() {
        let e = Envelope::error(Some("7".into()), ErrorCode::Role, "nope");
        let v: Value = serde_json::from_str(&e.to_text()).unwrap();
        assert_eq!(v, json!({"msg_id": "7", "kind": "error", "payload": {"code": "role", "message": "nope"}}));
        assert_eq!(e.error_code(), Some(ErrorCode::Role));
    }
}
