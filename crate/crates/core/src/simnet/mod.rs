//! Discrete-event cluster simulation: a seeded event loop over the protocol
//! state machines, a latency/loss network model, fault injection, and the
//! trace record everything downstream is computed from.

mod trace;
mod world;

pub use trace::{DropCause, Event, MsgKind, MsgSummary, Trace};
pub use world::{NetModel, StopReason, World, WorldConfig, PIN_APPLY_DELAY};
