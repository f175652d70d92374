//! Websocket control plane for a running town: sessions, command intake,
//! event and state pushes.

pub mod hub;
pub mod protocol;
pub mod server;

pub use hub::{Gateway, GatewayConfig, SessionHandle, SessionId, OVERFLOW_REASON};
pub use protocol::{catalog, Envelope, ErrorCode, Request, Role, Stream};
pub use server::{router, run_clock, serve, serve_on};
