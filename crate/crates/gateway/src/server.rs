//! Websocket transport and the tick clock.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde::Deserialize;
use tokio::net::TcpListener;
use tokio::sync::watch;

use crate::hub::{Gateway, SessionHandle};
use crate::protocol::{catalog, Envelope, ErrorCode, Role};

#[derive(Debug, Deserialize)]
struct WsParams {
    token: Option<String>,
    #[serde(default)]
    role: Option<Role>,
}

/// Routes: `/ws` (upgrade; optional `?token=&role=`), `/catalog`, `/state`.
pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/ws", get(upgrade))
        .route("/catalog", get(|| async { Json(catalog()) }))
        .route("/state", get(|State(gw): State<Arc<Gateway>>| async move { Json(gw.snapshot_state()) }))
        .with_state(gateway)
}

async fn upgrade(ws: WebSocketUpgrade, Query(params): Query<WsParams>, State(gw): State<Arc<Gateway>>) -> Response {
    let session = gw.open();
    if let Some(token) = &params.token {
        if let Err((code, message)) = gw.authenticate(session.id, token, params.role.unwrap_or(Role::Observer)) {
            gw.close(session.id);
            let status = if code == ErrorCode::Auth { StatusCode::UNAUTHORIZED } else { StatusCode::CONFLICT };
            return (status, message).into_response();
        }
    }
    ws.on_upgrade(move |socket| drive(socket, gw, session))
}

/// One writer per socket: replies and pushes are sent whole, one frame each.
async fn drive(socket: WebSocket, gw: Arc<Gateway>, mut session: SessionHandle) {
    let id = session.id;
    let (mut tx, mut rx) = socket.split();
    loop {
        tokio::select! {
            frame = rx.next() => {
                let text = match frame {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Binary(_))) => {
                        let reply = Envelope::error(None, ErrorCode::BadRequest, "binary frames are not supported");
                        if tx.send(Message::Text(reply.to_text().into())).await.is_err() { break; }
                        continue;
                    }
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let reply = match serde_json::from_str::<Envelope>(&text) {
                    Ok(envelope) => {
                        let gw = gw.clone();
                        tokio::task::spawn_blocking(move || gw.handle(id, &envelope))
                            .await
                            .unwrap_or_else(|e| Envelope::error(None, ErrorCode::BadRequest, e.to_string()))
                    }
                    Err(e) => Envelope::error(None, ErrorCode::BadRequest, format!("not an envelope: {e}")),
                };
                if tx.send(Message::Text(reply.to_text().into())).await.is_err() { break; }
            }
            push = session.pushes.recv() => match push {
                Some(envelope) => {
                    if tx.send(Message::Text(envelope.to_text().into())).await.is_err() { break; }
                }
                None => {
                    let reason = session.close_reason().unwrap_or("session closed").to_string();
                    let _ = tx.send(Message::Close(Some(CloseFrame { code: 1008, reason: reason.into() }))).await;
                    break;
                }
            },
        }
    }
    gw.close(id);
}

/// Advance the simulation at the gateway's current speed until `stop`
/// flips to true or `max_ticks` (if any) is reached.
pub async fn run_clock(gw: Arc<Gateway>, max_ticks: Option<u64>, mut stop: watch::Receiver<bool>) {
    loop {
        if *stop.borrow() || max_ticks.is_some_and(|m| gw.tick() >= m) {
            break;
        }
        let started = tokio::time::Instant::now();
        let g = gw.clone();
        let ticked = tokio::task::spawn_blocking(move || g.advance().is_some()).await.unwrap_or(false);
        let period = if ticked {
            Duration::from_secs_f64(1.0 / gw.speed()).saturating_sub(started.elapsed())
        } else {
            Duration::from_millis(20)
        };
        tokio::select! {
            _ = tokio::time::sleep(period) => {}
            _ = stop.changed() => {}
        }
    }
}

/// Bind and serve until `stop` flips to true.
pub async fn serve(gw: Arc<Gateway>, addr: SocketAddr, mut stop: watch::Receiver<bool>) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    log::info!("gateway listening on ws://{}/ws", listener.local_addr()?);
    serve_on(gw, listener, async move {
        let _ = stop.wait_for(|s| *s).await;
    })
    .await
}

pub async fn serve_on(
    gw: Arc<Gateway>,
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(gw)).with_graceful_shutdown(shutdown).await
}
