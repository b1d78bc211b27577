use std::collections::BTreeSet;
use std::fmt;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::StatesError;
use crate::blackboard::Blackboard;
use crate::cancel::CancelToken;
use crate::outcome::{Outcome, ABORTED};
use crate::state::StateHandle;
use crate::value::Value;

const REPLY_POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("endpoint `{0}` unreachable")]
    Unreachable(String),
    #[error("call failed: {0}")]
    Failed(String),
}

pub type ReplySender = mpsc::Sender<Result<Value, TransportError>>;

/// An in-flight request. The reply arrives on the channel; the optional
/// cancel hook is invoked if the caller gives up on the call.
pub struct PendingReply {
    reply: mpsc::Receiver<Result<Value, TransportError>>,
    on_cancel: Option<Box<dyn FnOnce() + Send>>,
}

impl PendingReply {
    pub fn channel() -> (ReplySender, PendingReply) {
        let (tx, rx) = mpsc::channel();
        (
            tx,
            PendingReply {
                reply: rx,
                on_cancel: None,
            },
        )
    }

    pub fn on_cancel(mut self, hook: impl FnOnce() + Send + 'static) -> Self {
        self.on_cancel = Some(Box::new(hook));
        self
    }

    fn cancel(self) {
        if let Some(hook) = self.on_cancel {
            hook();
        }
    }
}

/// Request/response transport used by [`remote_call_state`].
pub trait Transport: Send + Sync {
    fn send(&self, address: &str, request: Value) -> Result<PendingReply, TransportError>;
}

/// Replies to every request with the request itself.
#[derive(Debug, Default, Clone, Copy)]
pub struct LoopbackTransport;

impl Transport for LoopbackTransport {
    fn send(&self, _address: &str, request: Value) -> Result<PendingReply, TransportError> {
        let (tx, pending) = PendingReply::channel();
        let _ = tx.send(Ok(request));
        Ok(pending)
    }
}

#[derive(Clone)]
pub struct RemoteEndpoint {
    transport: Arc<dyn Transport>,
    address: String,
    timeout: Duration,
}

impl RemoteEndpoint {
    pub fn new(transport: Arc<dyn Transport>, address: impl Into<String>, timeout: Duration) -> Result<Self, StatesError> {
        if timeout.is_zero() {
            return Err(StatesError::InvalidTimeout);
        }
        Ok(Self {
            transport,
            address: address.into(),
            timeout,
        })
    }

    pub fn address(&self) -> &str {
        &self.address
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }
}

impl fmt::Debug for RemoteEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteEndpoint")
            .field("address", &self.address)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

/// A state that sends one request built from the blackboard and maps the
/// reply to an outcome.
///
/// Transport failures and timeouts yield `aborted`; a token set while waiting
/// cancels the call and yields `canceled`. Both outcomes are always declared,
/// in addition to `outcomes`.
pub fn remote_call_state<B, M>(
    endpoint: RemoteEndpoint,
    request_builder: B,
    response_mapper: M,
    outcomes: BTreeSet<Outcome>,
) -> Result<StateHandle, StatesError>
where
    B: Fn(&Blackboard) -> Value + Send + Sync + 'static,
    M: Fn(Value, &Blackboard) -> Outcome + Send + Sync + 'static,
{
    let mut outcomes = outcomes;
    outcomes.insert(Outcome::from_static(ABORTED));
    outcomes.insert(Outcome::canceled());
    let handle = StateHandle::new(outcomes, move |bb: &Blackboard, token: &CancelToken| {
        if token.is_canceled() {
            return Outcome::canceled();
        }
        let request = request_builder(bb);
        let pending = match endpoint.transport.send(&endpoint.address, request) {
            Ok(pending) => pending,
            Err(err) => {
                log::warn!("remote call to {} failed: {err}", endpoint.address);
                return Outcome::from_static(ABORTED);
            }
        };
        let deadline = Instant::now() + endpoint.timeout;
        loop {
            let now = Instant::now();
            if now >= deadline {
                log::warn!("remote call to {} timed out", endpoint.address);
                pending.cancel();
                return Outcome::from_static(ABORTED);
            }
            match pending.reply.recv_timeout(REPLY_POLL.min(deadline - now)) {
                Ok(Ok(reply)) => return response_mapper(reply, bb),
                Ok(Err(err)) => {
                    log::warn!("remote call to {} failed: {err}", endpoint.address);
                    return Outcome::from_static(ABORTED);
                }
                Err(RecvTimeoutError::Disconnected) => return Outcome::from_static(ABORTED),
                Err(RecvTimeoutError::Timeout) => {}
            }
            if token.is_canceled() {
                pending.cancel();
                return Outcome::canceled();
            }
        }
    })?;
    Ok(handle)
}
