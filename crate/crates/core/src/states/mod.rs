//! Ready-made states.
//!
//! [`callback_state`], [`wait_state`] and [`remote_call_state`] cover the
//! common cases when assembling machines in code. Definition documents reach
//! the same building blocks through the named primitives of
//! [`PrimitiveRegistry`].

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::blackboard::Blackboard;
use crate::cancel::CancelToken;
use crate::error::FsmError;
use crate::outcome::Outcome;
use crate::state::StateHandle;

mod primitives;
mod remote;

pub use primitives::{build_primitive, PrimitiveFactory, PrimitiveRegistry, PrimitiveSpec};
pub use remote::{
    remote_call_state, LoopbackTransport, PendingReply, RemoteEndpoint, ReplySender, Transport, TransportError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatesError {
    #[error("unknown primitive `{0}`")]
    UnknownPrimitive(String),
    #[error("bad parameters for `{primitive}`: {detail}")]
    BadParams { primitive: String, detail: String },
    #[error("invalid wait: duration {duration_ms} ms with poll interval {poll_ms} ms")]
    InvalidDuration { duration_ms: u64, poll_ms: u64 },
    #[error("remote call timeout must be positive")]
    InvalidTimeout,
    #[error(transparent)]
    Fsm(#[from] FsmError),
}

/// A state that runs `body` once. The token is checked first; a canceled
/// token returns `canceled` without calling `body`.
pub fn callback_state<F>(outcomes: BTreeSet<Outcome>, body: F) -> Result<StateHandle, StatesError>
where
    F: Fn(&Blackboard) -> Outcome + Send + Sync + 'static,
{
    let handle = StateHandle::new(outcomes, move |bb: &Blackboard, token: &CancelToken| {
        if token.is_canceled() {
            return Outcome::canceled();
        }
        body(bb)
    })?;
    Ok(handle)
}

/// A state that waits `duration_ms`, checking the token every `poll_ms`.
/// Declares `done` and `canceled`.
pub fn wait_state(duration_ms: u64, poll_ms: u64) -> Result<StateHandle, StatesError> {
    if duration_ms > 0 && (poll_ms == 0 || poll_ms > duration_ms) {
        return Err(StatesError::InvalidDuration { duration_ms, poll_ms });
    }
    let duration = Duration::from_millis(duration_ms);
    let poll = Duration::from_millis(poll_ms.max(1));
    let outcomes = BTreeSet::from([Outcome::from_static("done"), Outcome::canceled()]);
    let handle = StateHandle::new(outcomes, move |_: &Blackboard, token: &CancelToken| {
        if token.is_canceled() {
            return Outcome::canceled();
        }
        let deadline = Instant::now() + duration;
        loop {
            let now = Instant::now();
            if now >= deadline {
                return Outcome::from_static("done");
            }
            if token.wait_timeout(poll.min(deadline - now)) {
                return Outcome::canceled();
            }
        }
    })?;
    Ok(handle)
}
