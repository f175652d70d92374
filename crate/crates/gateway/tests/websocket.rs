use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use hamlet_core::backend::BackendRegistry;
use hamlet_core::engine::Engine;
use hamlet_core::eval::{prepare_episode, RunOptions, TaskSpec};
use hamlet_core::world::WorldConfig;
use hamlet_gateway::{serve_on, Envelope, ErrorCode, Gateway, GatewayConfig};
use serde_json::{json, Value};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::oneshot;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

fn demo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

fn gateway() -> Arc<Gateway> {
    let backends = std::fs::read_to_string(demo().join("backends.json")).unwrap();
    let engine = Engine::new(Arc::new(BackendRegistry::from_json(&backends).unwrap()));
    let world = WorldConfig::load_dir(demo()).unwrap();
    let task = TaskSpec::load(demo().join("buy_chicken.task.json")).unwrap();
    let (state, setup) = prepare_episode(&task, &world, 1, &engine, &RunOptions::default()).unwrap();
    Gateway::new(engine, state, setup, GatewayConfig { start_paused: true, ..GatewayConfig::default() })
}

async fn start(gw: Arc<Gateway>) -> (String, oneshot::Sender<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = oneshot::channel();
    tokio::spawn(serve_on(gw, listener, async move {
        let _ = rx.await;
    }));
    (format!("ws://{addr}/ws"), tx)
}

async fn send(ws: &mut Ws, id: &str, kind: &str, payload: Value) {
    let env = Envelope::request(id, kind, payload);
    ws.send(Message::Text(env.to_text().into())).await.unwrap();
}

async fn next(ws: &mut Ws) -> Envelope {
    loop {
        let frame = tokio::time::timeout(Duration::from_secs(5), ws.next()).await.expect("frame in time");
        match frame.expect("socket open").unwrap() {
            Message::Text(t) => return serde_json::from_str(&t).unwrap(),
            _ => continue,
        }
    }
}

/// The reply to `id`, collecting any pushes that arrive first.
async fn reply(ws: &mut Ws, id: &str, pushes: &mut Vec<Envelope>) -> Envelope {
    loop {
        let e = next(ws).await;
        if e.msg_id.as_deref() == Some(id) {
            return e;
        }
        pushes.push(e);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn live_session_over_websocket() {
    let gw = gateway();
    let (url, stop) = start(gw.clone()).await;
    let (mut ws, _) = connect_async(format!("{url}?token=hamlet&role=mayor")).await.unwrap();
    let mut pushes = Vec::new();

    send(&mut ws, "1", "subscribe", json!({"streams": ["events"]})).await;
    assert!(reply(&mut ws, "1", &mut pushes).await.is_ack());

    let bea = json!({"profile": {"name": "Bea", "backend_id": "scripted-v1", "goal": "get some chicken"}, "spawn": [9, 9]});
    send(&mut ws, "2", "create_agent", bea).await;
    let ack = reply(&mut ws, "2", &mut pushes).await;
    assert_eq!(ack.payload["applies_at_tick"], 1);

    send(&mut ws, "3", "mayor_say", json!({"target_agent": 1, "text": "Good morning"})).await;
    assert!(reply(&mut ws, "3", &mut pushes).await.is_ack());

    send(&mut ws, "4", "step", json!({"ticks": 3})).await;
    assert_eq!(reply(&mut ws, "4", &mut pushes).await.payload["tick"], 3);

    let log = gw.log();
    let expected = log.iter().filter(|e| e.tick >= 1).count();
    while pushes.len() < expected {
        pushes.push(next(&mut ws).await);
    }
    let seqs: Vec<u64> = pushes.iter().map(|e| e.payload["seq"].as_u64().unwrap()).collect();
    let logged: Vec<u64> = log.iter().filter(|e| e.tick >= 1).map(|e| e.seq).collect();
    assert_eq!(seqs, logged);
    assert!(pushes.iter().any(|e| e.payload["kind"] == "agent_created"));
    assert!(pushes.iter().any(|e| e.payload["kind"] == "mayor_say"));
    let _ = stop.send(());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn hello_frame_auth_and_errors() {
    let gw = gateway();
    let (url, stop) = start(gw.clone()).await;

    assert!(connect_async(format!("{url}?token=wrong")).await.is_err());

    let (mut ws, _) = connect_async(url.clone()).await.unwrap();
    let mut pushes = Vec::new();
    send(&mut ws, "a", "snapshot", Value::Null).await;
    assert_eq!(reply(&mut ws, "a", &mut pushes).await.error_code(), Some(ErrorCode::Auth));
    send(&mut ws, "b", "hello", json!({"token": "hamlet"})).await;
    assert!(reply(&mut ws, "b", &mut pushes).await.is_ack());
    send(&mut ws, "c", "mayor_say", json!({"target_agent": 1, "text": "hi"})).await;
    assert_eq!(reply(&mut ws, "c", &mut pushes).await.error_code(), Some(ErrorCode::Role));
    send(&mut ws, "d", "snapshot", Value::Null).await;
    let snap = reply(&mut ws, "d", &mut pushes).await;
    assert_eq!(snap.payload["agents"].as_array().unwrap().len(), 1);

    ws.send(Message::Text("not json".into())).await.unwrap();
    assert_eq!(next(&mut ws).await.error_code(), Some(ErrorCode::BadRequest));
    assert!(pushes.is_empty());
    let _ = stop.send(());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn clock_runs_until_the_tick_limit() {
    let gw = gateway();
    let (_tx, rx) = tokio::sync::watch::channel(false);
    let s = gw.open();
    gw.authenticate(s.id, "hamlet", hamlet_gateway::Role::Observer).unwrap();
    gw.handle(s.id, &Envelope::request("1", "set_speed", json!({"ticks_per_sec": 50})));
    gw.handle(s.id, &Envelope::request("2", "resume", Value::Null));
    tokio::time::timeout(Duration::from_secs(5), hamlet_gateway::run_clock(gw.clone(), Some(5), rx))
        .await
        .unwrap();
    assert_eq!(gw.tick(), 5);
}
