//! The single-simulation hub: owns the engine state, the event log, the
//! recorded command schedule and every session's push buffer.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex, MutexGuard, OnceLock};

use hamlet_core::engine::{Command, Engine, Event, ScheduledCommand, SimState};
use hamlet_core::Tick;
use serde_json::{json, Value};
use tokio::sync::mpsc;

use crate::protocol::{Envelope, ErrorCode, Request, Role, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    /// Static token every session must present.
    pub token: String,
    pub max_speed: f64,
    /// Initial ticks per second.
    pub speed: f64,
    /// Pushes buffered per session before it is disconnected.
    pub push_buffer: usize,
    pub start_paused: bool,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            token: "hamlet".into(),
            max_speed: 50.0,
            speed: 2.0,
            push_buffer: 4096,
            start_paused: false,
        }
    }
}

pub type SessionId = u64;

/// Close reason for a session whose buffer overflowed.
pub const OVERFLOW_REASON: &str = "push buffer overflow";

/// The receiving end of a session: server pushes arrive on `pushes`.
/// Replies are returned directly from [`Gateway::handle`].
#[derive(Debug)]
pub struct SessionHandle {
    pub id: SessionId,
    pub pushes: mpsc::Receiver<Envelope>,
    closed: Arc<OnceLock<String>>,
}

impl SessionHandle {
    /// Why the gateway dropped this session, if it did.
    pub fn close_reason(&self) -> Option<&str> {
        self.closed.get().map(String::as_str)
    }

    /// Everything pushed so far, without waiting.
    pub fn drain(&mut self) -> Vec<Envelope> {
        let mut out = Vec::new();
        while let Ok(e) = self.pushes.try_recv() {
            out.push(e);
        }
        out
    }
}

#[derive(Debug)]
struct Session {
    role: Option<Role>,
    streams: BTreeSet<Stream>,
    tx: mpsc::Sender<Envelope>,
    closed: Arc<OnceLock<String>>,
}

struct Inner {
    state: SimState,
    log: Vec<Event>,
    schedule: Vec<ScheduledCommand>,
    sessions: BTreeMap<SessionId, Session>,
    next_session: SessionId,
    paused: bool,
    speed: f64,
}

pub struct Gateway {
    engine: Engine,
    config: GatewayConfig,
    inner: Mutex<Inner>,
}

type Reply = Result<Value, (ErrorCode, String)>;

impl Gateway {
    /// `setup` holds events already emitted while building `state`; they
    /// open the log.
    pub fn new(engine: Engine, state: SimState, setup: Vec<Event>, config: GatewayConfig) -> Arc<Self> {
        let speed = config.speed.min(config.max_speed);
        Arc::new(Self {
            engine,
            inner: Mutex::new(Inner {
                state,
                log: setup,
                schedule: Vec::new(),
                sessions: BTreeMap::new(),
                next_session: 1,
                paused: config.start_paused,
                speed,
            }),
            config,
        })
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().expect("gateway state poisoned")
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn open(&self) -> SessionHandle {
        let (tx, rx) = mpsc::channel(self.config.push_buffer.max(1));
        let closed = Arc::new(OnceLock::new());
        let mut inner = self.lock();
        let id = inner.next_session;
        inner.next_session += 1;
        inner.sessions.insert(
            id,
            Session { role: None, streams: BTreeSet::new(), tx, closed: closed.clone() },
        );
        log::debug!("session {id} opened");
        SessionHandle { id, pushes: rx, closed }
    }

    pub fn close(&self, id: SessionId) {
        if self.lock().sessions.remove(&id).is_some() {
            log::debug!("session {id} closed");
        }
    }

    /// Authenticate outside the envelope flow (query-string auth).
    pub fn authenticate(&self, id: SessionId, token: &str, role: Role) -> Result<(), (ErrorCode, String)> {
        let mut inner = self.lock();
        self.hello(&mut inner, id, Some(token), role).map(|_| ())
    }

    fn hello(&self, inner: &mut Inner, id: SessionId, token: Option<&str>, role: Role) -> Reply {
        if token != Some(self.config.token.as_str()) {
            return Err((ErrorCode::Auth, "bad or missing token".into()));
        }
        if role == Role::Mayor && inner.sessions.iter().any(|(sid, s)| *sid != id && s.role == Some(Role::Mayor)) {
            return Err((ErrorCode::Conflict, "a mayor session is already connected".into()));
        }
        let session = inner.sessions.get_mut(&id).ok_or((ErrorCode::Auth, "session is closed".into()))?;
        if session.role.is_some() {
            return Err((ErrorCode::Conflict, "session already authenticated".into()));
        }
        session.role = Some(role);
        Ok(json!({"session_id": id, "role": role, "tick": inner.state.tick}))
    }

    /// Handle one client envelope. Always returns exactly one reply with
    /// the request's `msg_id`.
    pub fn handle(&self, id: SessionId, envelope: &Envelope) -> Envelope {
        let msg_id = envelope.msg_id.clone();
        let result = Request::parse(envelope).and_then(|request| {
            let mut inner = self.lock();
            self.dispatch(&mut inner, id, request)
        });
        match result {
            Ok(payload) => Envelope::ack(msg_id, payload),
            Err((code, message)) => {
                log::debug!("session {id}: {} rejected: {message}", envelope.kind);
                Envelope::error(msg_id, code, message)
            }
        }
    }

    fn dispatch(&self, inner: &mut Inner, id: SessionId, request: Request) -> Reply {
        if let Request::Hello { token, role } = &request {
            return self.hello(inner, id, token.as_deref(), *role);
        }
        let role = inner
            .sessions
            .get(&id)
            .and_then(|s| s.role)
            .ok_or((ErrorCode::Auth, "send hello with the token first".into()))?;
        if let Some(command) = request.command() {
            if matches!(command, Command::MayorSay { .. }) && role != Role::Mayor {
                return Err((ErrorCode::Role, "mayor_say needs the mayor role".into()));
            }
            self.engine
                .validate_command(&inner.state, &command)
                .map_err(|e| (ErrorCode::Validation, e.to_string()))?;
            let applies_at_tick = self.engine.schedule(&mut inner.state, command.clone());
            inner.schedule.push(ScheduledCommand { applies_at_tick, command });
            return Ok(json!({"applies_at_tick": applies_at_tick}));
        }
        match request {
            Request::Pause => {
                inner.paused = true;
                Ok(json!({"paused": true, "tick": inner.state.tick}))
            }
            Request::Resume => {
                inner.paused = false;
                Ok(json!({"paused": false, "tick": inner.state.tick}))
            }
            Request::SetSpeed { ticks_per_sec } => {
                if !(ticks_per_sec.is_finite() && ticks_per_sec > 0.0) {
                    return Err((ErrorCode::Validation, "ticks_per_sec must be positive".into()));
                }
                inner.speed = ticks_per_sec.min(self.config.max_speed);
                Ok(json!({"ticks_per_sec": inner.speed}))
            }
            Request::Step { ticks } => {
                if !inner.paused {
                    return Err((ErrorCode::Conflict, "step needs a paused simulation".into()));
                }
                if ticks == 0 {
                    return Err((ErrorCode::Validation, "ticks must be at least 1".into()));
                }
                for _ in 0..ticks {
                    self.tick_locked(inner);
                }
                Ok(json!({"tick": inner.state.tick}))
            }
            Request::Snapshot => Ok(snapshot_doc(inner)),
            Request::Subscribe { streams } => {
                let session = inner.sessions.get_mut(&id).expect("authenticated session");
                session.streams.extend(streams);
                Ok(json!({"streams": session.streams}))
            }
            Request::Unsubscribe { streams } => {
                let session = inner.sessions.get_mut(&id).expect("authenticated session");
                session.streams.retain(|s| !streams.contains(s));
                Ok(json!({"streams": session.streams}))
            }
            Request::ResumeFrom { tick, seq } => {
                let backlog: Vec<Envelope> = inner
                    .log
                    .iter()
                    .filter(|e| (e.tick, e.seq) > (tick, seq))
                    .map(Envelope::event)
                    .collect();
                let replayed = backlog.len();
                let session = inner.sessions.get_mut(&id).expect("authenticated session");
                session.streams.insert(Stream::Events);
                if !backlog.into_iter().all(|e| offer(id, session, e)) {
                    inner.sessions.remove(&id);
                }
                Ok(json!({"replayed": replayed, "tick": inner.state.tick}))
            }
            Request::Hello { .. } | Request::CreateAgent { .. } | Request::CreateBuilding { .. } | Request::MayorSay { .. } => {
                unreachable!("handled above")
            }
        }
    }

    /// Run one tick unless paused. Returns the tick's events.
    pub fn advance(&self) -> Option<Vec<Event>> {
        let mut inner = self.lock();
        if inner.paused {
            return None;
        }
        Some(self.tick_locked(&mut inner))
    }

    fn tick_locked(&self, inner: &mut Inner) -> Vec<Event> {
        let events = self.engine.tick(&mut inner.state);
        inner.log.extend(events.iter().cloned());
        let state_doc = inner
            .sessions
            .values()
            .any(|s| s.streams.contains(&Stream::State))
            .then(|| Envelope { msg_id: None, kind: "state".into(), payload: snapshot_doc(inner) });
        let mut dropped = Vec::new();
        for (id, session) in &inner.sessions {
            let mut pushes: Vec<Envelope> = Vec::new();
            if session.streams.contains(&Stream::Events) {
                pushes.extend(events.iter().map(Envelope::event));
            }
            if let (true, Some(doc)) = (session.streams.contains(&Stream::State), &state_doc) {
                pushes.push(doc.clone());
            }
            if !pushes.into_iter().all(|e| offer(*id, session, e)) {
                dropped.push(*id);
            }
        }
        for id in dropped {
            inner.sessions.remove(&id);
        }
        events
    }

    pub fn tick(&self) -> Tick {
        self.lock().state.tick
    }

    pub fn is_paused(&self) -> bool {
        self.lock().paused
    }

    pub fn speed(&self) -> f64 {
        self.lock().speed
    }

    /// The full event log, setup events first.
    pub fn log(&self) -> Vec<Event> {
        self.lock().log.clone()
    }

    /// Every accepted command with the tick it applies at, in arrival order.
    pub fn schedule(&self) -> Vec<ScheduledCommand> {
        self.lock().schedule.clone()
    }

    pub fn snapshot_state(&self) -> Value {
        snapshot_doc(&self.lock())
    }

    /// Read-only access to the state between ticks.
    pub fn with_state<R>(&self, f: impl FnOnce(&SimState) -> R) -> R {
        f(&self.lock().state)
    }

    pub fn session_count(&self) -> usize {
        self.lock().sessions.len()
    }
}

/// Queue a push; on a full buffer record the close reason and report false.
fn offer(id: SessionId, session: &Session, envelope: Envelope) -> bool {
    match session.tx.try_send(envelope) {
        Ok(()) => true,
        Err(mpsc::error::TrySendError::Full(_)) => {
            log::warn!("session {id}: {OVERFLOW_REASON}, disconnecting");
            let _ = session.closed.set(OVERFLOW_REASON.into());
            false
        }
        Err(mpsc::error::TrySendError::Closed(_)) => {
            let _ = session.closed.set("client went away".into());
            false
        }
    }
}

fn snapshot_doc(inner: &Inner) -> Value {
    let state = &inner.state;
    json!({
        "tick": state.tick,
        "paused": inner.paused,
        "ticks_per_sec": inner.speed,
        "map": state.map,
        "agents": state.agents.values().map(|a| json!({
            "id": a.id,
            "name": a.profile.name,
            "location": a.location,
            "status": a.status,
            "cash": a.cash,
            "mayor": a.mayor,
        })).collect::<Vec<_>>(),
        "pending": state.pending.len(),
        "event_count": state.event_count,
    })
}

#[cfg(test)]
mod tests;
