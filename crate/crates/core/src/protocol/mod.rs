//! Protocol state machines: server roles, elections, log replication and
//! the per-variant term/timeout rules.

mod server;
mod types;

pub use server::{DenyReason, Effects, LeaderVolatile, ServerState};
pub use types::*;
