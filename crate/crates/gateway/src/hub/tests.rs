use std::path::PathBuf;
use std::sync::Arc;

use hamlet_core::backend::BackendRegistry;
use hamlet_core::engine::EventKind;
use hamlet_core::eval::{prepare_episode, RunOptions, TaskSpec};
use hamlet_core::world::WorldConfig;
use serde_json::json;

use super::*;

fn demo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

fn gateway(config: GatewayConfig) -> Arc<Gateway> {
    let backends = std::fs::read_to_string(demo().join("backends.json")).unwrap();
    let engine = Engine::new(Arc::new(BackendRegistry::from_json(&backends).unwrap()));
    let world = WorldConfig::load_dir(demo()).unwrap();
    let task = TaskSpec::load(demo().join("buy_chicken.task.json")).unwrap();
    let (state, setup) = prepare_episode(&task, &world, 1, &engine, &RunOptions::default()).unwrap();
    Gateway::new(engine, state, setup, config)
}

fn paused() -> Arc<Gateway> {
    gateway(GatewayConfig { start_paused: true, ..GatewayConfig::default() })
}

fn login(gw: &Gateway, role: Role) -> SessionHandle {
    let s = gw.open();
    gw.authenticate(s.id, "hamlet", role).unwrap();
    s
}

fn req(gw: &Gateway, s: &SessionHandle, kind: &str, payload: Value) -> Envelope {
    let reply = gw.handle(s.id, &Envelope::request("m1", kind, payload));
    assert_eq!(reply.msg_id.as_deref(), Some("m1"));
    reply
}

fn bea() -> Value {
    json!({"profile": {"name": "Bea", "backend_id": "scripted-v1", "goal": "get some chicken", "starting_cash": 40}, "spawn": [9, 9]})
}

#[test]
fn create_agent_acked_then_applied_next_tick() {
    let gw = paused();
    let mut s = login(&gw, Role::Observer);
    req(&gw, &s, "subscribe", json!({"streams": ["events"]}));
    let reply = req(&gw, &s, "create_agent", bea());
    assert!(reply.is_ack(), "{reply:?}");
    assert_eq!(reply.payload["applies_at_tick"], 1);
    assert!(s.drain().is_empty());
    req(&gw, &s, "step", json!({"ticks": 1}));
    let pushed = s.drain();
    let created: Vec<&Envelope> = pushed.iter().filter(|e| e.payload["kind"] == "agent_created").collect();
    assert_eq!(created.len(), 1);
    assert_eq!(created[0].payload["tick"], 1);
    assert!(gw.with_state(|st| st.agent_named("Bea").is_some()));
}

#[test]
fn mayor_say_from_observer_is_a_role_error() {
    let gw = paused();
    let s = login(&gw, Role::Observer);
    let reply = req(&gw, &s, "mayor_say", json!({"target_agent": 1, "text": "hi"}));
    assert_eq!(reply.error_code(), Some(ErrorCode::Role));
    assert!(gw.schedule().is_empty());
    assert!(gw.with_state(|st| st.pending.is_empty()));

    let m = login(&gw, Role::Mayor);
    let reply = req(&gw, &m, "mayor_say", json!({"target_agent": 1, "text": "hi"}));
    assert!(reply.is_ack(), "{reply:?}");
    assert_eq!(gw.schedule().len(), 1);
}

#[test]
fn overlapping_building_cites_the_overlap() {
    let gw = paused();
    let s = login(&gw, Role::Observer);
    // The store sits at (2,2); a house at (1,1) covers (2,2).
    let reply = req(&gw, &s, "create_building", json!({"building_id": 5, "origin": [1, 1]}));
    assert_eq!(reply.error_code(), Some(ErrorCode::Validation));
    let msg = reply.payload["message"].as_str().unwrap();
    assert!(msg.contains("(2, 2)") || msg.contains("2,2") || msg.contains("occupied"), "{msg}");
    assert!(msg.contains("building 1"), "{msg}");
    assert!(req(&gw, &s, "create_building", json!({"building_id": 5, "origin": [8, 8]})).is_ack());
}

#[test]
fn commands_before_hello_are_refused() {
    let gw = paused();
    let s = gw.open();
    assert_eq!(req(&gw, &s, "snapshot", Value::Null).error_code(), Some(ErrorCode::Auth));
    assert_eq!(req(&gw, &s, "hello", json!({"token": "nope"})).error_code(), Some(ErrorCode::Auth));
    let ok = req(&gw, &s, "hello", json!({"token": "hamlet", "role": "observer"}));
    assert!(ok.is_ack());
    assert_eq!(req(&gw, &s, "hello", json!({"token": "hamlet"})).error_code(), Some(ErrorCode::Conflict));
}

#[test]
fn one_mayor_at_a_time() {
    let gw = paused();
    let first = login(&gw, Role::Mayor);
    let second = gw.open();
    assert_eq!(gw.authenticate(second.id, "hamlet", Role::Mayor).unwrap_err().0, ErrorCode::Conflict);
    gw.close(first.id);
    gw.authenticate(second.id, "hamlet", Role::Mayor).unwrap();
}

#[test]
fn every_request_gets_exactly_one_reply() {
    let gw = paused();
    let s = login(&gw, Role::Observer);
    for (kind, payload) in [
        ("pause", Value::Null),
        ("teleport", Value::Null),
        ("set_speed", json!({"ticks_per_sec": "fast"})),
        ("create_agent", json!({"profile": {"name": "", "backend_id": "scripted-v1"}, "spawn": [0, 0]})),
    ] {
        let reply = gw.handle(s.id, &Envelope::request(kind, kind, payload));
        assert_eq!(reply.msg_id.as_deref(), Some(kind));
        assert!(matches!(reply.kind.as_str(), "ack" | "error"));
    }
}

#[test]
fn unsubscribed_sessions_get_nothing() {
    let gw = gateway(GatewayConfig::default());
    let mut quiet = login(&gw, Role::Observer);
    let mut loud = login(&gw, Role::Observer);
    req(&gw, &loud, "subscribe", json!({"streams": ["events"]}));
    let events = gw.advance().unwrap();
    assert!(quiet.drain().is_empty());
    let got: Vec<u64> = loud.drain().iter().map(|e| e.payload["seq"].as_u64().unwrap()).collect();
    assert_eq!(got, events.iter().map(|e| e.seq).collect::<Vec<_>>());

    req(&gw, &loud, "unsubscribe", json!({"streams": ["events"]}));
    gw.advance().unwrap();
    assert!(loud.drain().is_empty());
}

#[test]
fn pushes_arrive_in_tick_seq_order() {
    let gw = gateway(GatewayConfig::default());
    let mut s = login(&gw, Role::Observer);
    req(&gw, &s, "subscribe", json!({"streams": ["events"]}));
    for _ in 0..5 {
        gw.advance();
    }
    let keys: Vec<(u64, u64)> = s
        .drain()
        .iter()
        .map(|e| (e.payload["tick"].as_u64().unwrap(), e.payload["seq"].as_u64().unwrap()))
        .collect();
    assert!(keys.len() >= 5);
    assert!(keys.windows(2).all(|w| w[0] < w[1] && w[1].1 == w[0].1 + 1));
}

#[test]
fn resume_from_replays_the_log_tail() {
    let gw = gateway(GatewayConfig::default());
    for _ in 0..4 {
        gw.advance();
    }
    let log = gw.log();
    let cut = &log[log.len() / 2];
    let mut s = login(&gw, Role::Observer);
    let reply = req(&gw, &s, "resume_from", json!({"tick": cut.tick, "seq": cut.seq}));
    let tail: Vec<u64> = log.iter().filter(|e| e.seq > cut.seq).map(|e| e.seq).collect();
    assert_eq!(reply.payload["replayed"], tail.len());
    let got: Vec<u64> = s.drain().iter().map(|e| e.payload["seq"].as_u64().unwrap()).collect();
    assert_eq!(got, tail);
    // and the session keeps streaming
    gw.advance();
    assert!(!s.drain().is_empty());
}

#[test]
fn slow_session_is_dropped_with_a_reason() {
    let gw = gateway(GatewayConfig { push_buffer: 3, ..GatewayConfig::default() });
    let s = login(&gw, Role::Observer);
    req(&gw, &s, "subscribe", json!({"streams": ["events"]}));
    for _ in 0..4 {
        gw.advance();
    }
    assert_eq!(s.close_reason(), Some(OVERFLOW_REASON));
    assert_eq!(gw.session_count(), 0);
}

#[test]
fn pause_halts_ticks_and_queued_commands_apply_on_resume() {
    let gw = gateway(GatewayConfig::default());
    let s = login(&gw, Role::Observer);
    gw.advance();
    req(&gw, &s, "pause", Value::Null);
    let before = gw.snapshot_state();
    let a = req(&gw, &s, "create_building", json!({"building_id": 5, "origin": [9, 5]}));
    let b = req(&gw, &s, "create_agent", bea());
    assert_eq!(a.payload["applies_at_tick"], 2);
    assert_eq!(b.payload["applies_at_tick"], 2);
    assert!(gw.advance().is_none());
    let during = gw.snapshot_state();
    assert_eq!(during["tick"], before["tick"]);
    assert_eq!(during["agents"], before["agents"]);
    assert_eq!(req(&gw, &s, "step", Value::Null).payload["tick"], 2);
    let log = gw.log();
    let applied: Vec<EventKind> = log
        .iter()
        .filter(|e| e.tick == 2 && matches!(e.kind, EventKind::BuildingPlaced | EventKind::AgentCreated))
        .map(|e| e.kind)
        .collect();
    assert_eq!(applied, vec![EventKind::BuildingPlaced, EventKind::AgentCreated]);
    req(&gw, &s, "resume", Value::Null);
    assert_eq!(req(&gw, &s, "step", Value::Null).error_code(), Some(ErrorCode::Conflict));
    assert!(gw.advance().is_some());
}

#[test]
fn speed_is_capped() {
    let gw = paused();
    let s = login(&gw, Role::Observer);
    assert_eq!(req(&gw, &s, "set_speed", json!({"ticks_per_sec": 1e6})).payload["ticks_per_sec"], 50.0);
    assert_eq!(req(&gw, &s, "set_speed", json!({"ticks_per_sec": 0.5})).payload["ticks_per_sec"], 0.5);
    assert_eq!(req(&gw, &s, "set_speed", json!({"ticks_per_sec": -1})).error_code(), Some(ErrorCode::Validation));
    assert_eq!(gw.speed(), 0.5);
}

#[test]
fn snapshot_lists_agents_and_tracks_moves() {
    let gw = paused();
    let s = login(&gw, Role::Observer);
    req(&gw, &s, "create_agent", bea());
    req(&gw, &s, "step", Value::Null);
    let doc = req(&gw, &s, "snapshot", Value::Null).payload;
    let agents = doc["agents"].as_array().unwrap();
    assert_eq!(agents.len(), 2);
    assert_eq!(agents[1]["name"], "Bea");
    assert_eq!(doc["map"]["placements"].as_array().unwrap().len(), 2);

    let log = gw.log();
    let last_move = log.iter().rev().find(|e| e.kind == EventKind::Move && e.agent().map(|a| a.0) == Some(1)).unwrap();
    assert_eq!(agents[0]["location"], last_move.payload["to"]);
}

#[test]
fn state_stream_pushes_one_doc_per_tick() {
    let gw = gateway(GatewayConfig::default());
    let mut s = login(&gw, Role::Observer);
    req(&gw, &s, "subscribe", json!({"streams": ["state"]}));
    gw.advance();
    gw.advance();
    let docs = s.drain();
    assert_eq!(docs.len(), 2);
    assert!(docs.iter().all(|d| d.kind == "state"));
    assert_eq!(docs[1].payload["tick"], 2);
}

#[test]
fn schedule_replays_to_the_same_log() {
    let gw = paused();
    let s = login(&gw, Role::Mayor);
    req(&gw, &s, "step", json!({"ticks": 3}));
    req(&gw, &s, "create_agent", bea());
    req(&gw, &s, "step", json!({"ticks": 2}));
    req(&gw, &s, "mayor_say", json!({"target_agent": 2, "text": "Welcome to town"}));
    req(&gw, &s, "create_building", json!({"building_id": 5, "origin": [8, 8]}));
    req(&gw, &s, "step", json!({"ticks": 6}));

    let fresh = paused();
    let mut state = fresh.lock().state.clone();
    let mut log = fresh.log();
    for sc in gw.schedule() {
        fresh.engine.schedule_at(&mut state, sc.applies_at_tick, sc.command);
    }
    log.extend(fresh.engine.run(&mut state, gw.tick(), |_, _| false));
    assert_eq!(log, gw.log());
    assert!(log.iter().any(|e| e.kind == EventKind::MayorSay));
}
