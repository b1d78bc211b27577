//! Live monitoring for hsm state machines.
//!
//! A [`Registry`] holds the machines to watch. [`serve`] publishes a
//! [`MonitorSnapshot`] of each one at a fixed rate over a WebSocket at
//! `/ws`, lists the registered ids at `GET /fsms`, and optionally serves a
//! viewer bundle at `/`.

mod error;
mod registry;
mod server;
mod snapshot;
pub mod wire;

pub use error::MonitorError;
pub use registry::Registry;
pub use server::{serve, serve_with, ServeConfig, ServerHandle};
pub use snapshot::{now_ms, snapshot, MonitorSnapshot, StateDescriptor, Status, StructureDescriptor};
pub use wire::{decode, encode, DecodeError};
