use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use hsm_core::definition::{FsmDefinition, StateBody};
use hsm_core::states::{callback_state, PendingReply, PrimitiveRegistry, ReplySender, Transport, TransportError};
use hsm_core::{Blackboard, CancelToken, FsmError, Outcome, StateHandle, StateMachine, Value};
use parking_lot::Mutex;

/// Accepts every request and never answers.
#[derive(Default)]
pub struct BlackHoleTransport {
    held: Mutex<Vec<ReplySender>>,
}

impl Transport for BlackHoleTransport {
    fn send(&self, _address: &str, _request: Value) -> Result<PendingReply, TransportError> {
        let (tx, pending) = PendingReply::channel();
        self.held.lock().push(tx);
        Ok(pending)
    }
}

/// Holds each reply until [`LatchTransport::release`] and counts cancels.
#[derive(Default)]
pub struct LatchTransport {
    pending: Mutex<Vec<(ReplySender, Value)>>,
    pub cancels: Arc<AtomicUsize>,
}

impl LatchTransport {
    pub fn release(&self) {
        for (tx, request) in self.pending.lock().drain(..) {
            let _ = tx.send(Ok(request));
        }
    }

    pub fn cancel_count(&self) -> usize {
        self.cancels.load(Ordering::SeqCst)
    }
}

impl Transport for LatchTransport {
    fn send(&self, _address: &str, request: Value) -> Result<PendingReply, TransportError> {
        let (tx, pending) = PendingReply::channel();
        self.pending.lock().push((tx, request));
        let cancels = Arc::clone(&self.cancels);
        Ok(pending.on_cancel(move || {
            cancels.fetch_add(1, Ordering::SeqCst);
        }))
    }
}

/// Fails every request immediately.
pub struct DownTransport;

impl Transport for DownTransport {
    fn send(&self, address: &str, _request: Value) -> Result<PendingReply, TransportError> {
        Err(TransportError::Unreachable(address.to_owned()))
    }
}

/// Controls for [`rendezvous_machine`]: `reached` fires when ROTATE starts,
/// and ROTATE returns once `release` is sent.
pub struct Rendezvous {
    pub reached: mpsc::Receiver<()>,
    pub release: mpsc::Sender<()>,
}

impl Rendezvous {
    pub fn wait_reached(&self) {
        self.reached
            .recv_timeout(Duration::from_secs(10))
            .expect("rendezvous point not reached");
    }
}

/// `OUTER` with one state `MOVE`, a nested machine `MOTION` whose only
/// state `ROTATE` pauses until released.
pub fn rendezvous_machine() -> (Arc<StateMachine>, Arc<StateMachine>, Rendezvous) {
    let (reached_tx, reached_rx) = mpsc::channel();
    let (release_tx, release_rx) = mpsc::channel::<()>();
    let release_rx = Mutex::new(release_rx);
    let rotate = callback_state(BTreeSet::from([Outcome::from_static("done")]), move |_| {
        let _ = reached_tx.send(());
        let _ = release_rx.lock().recv_timeout(Duration::from_secs(10));
        Outcome::from_static("done")
    })
    .unwrap();
    let inner = Arc::new(StateMachine::new("MOTION", ["succeeded"]).unwrap());
    inner.add_state("ROTATE", rotate, [("done", "succeeded")]).unwrap();
    let outer = Arc::new(StateMachine::new("OUTER", ["succeeded"]).unwrap());
    outer
        .add_state("MOVE", StateHandle::machine(Arc::clone(&inner)), [("succeeded", "succeeded")])
        .unwrap();
    (
        outer,
        inner,
        Rendezvous {
            reached: reached_rx,
            release: release_tx,
        },
    )
}

/// Builds a machine from a definition without linting first, so defective
/// definitions can be compared against the engine validator. Transitions on
/// undeclared outcomes cannot be added and are dropped.
pub fn assemble_unchecked(def: &FsmDefinition, registry: &PrimitiveRegistry) -> Result<StateMachine, FsmError> {
    let machine = StateMachine::new(def.name.as_str(), def.outcomes.iter().map(String::as_str))?;
    for (name, state) in &def.states {
        let handle = match &state.body {
            StateBody::Primitive(spec) => registry.build(spec).expect("fixture primitives are valid"),
            StateBody::Machine(child) => StateHandle::machine(Arc::new(assemble_unchecked(child, registry)?)),
        };
        let transitions: Vec<_> = state
            .transitions
            .iter()
            .filter(|(o, _)| handle.allows(&Outcome::new(o.as_str()).unwrap()))
            .map(|(o, t)| (o.clone(), t.clone()))
            .collect();
        machine.add_state(name.as_str(), handle, transitions)?;
    }
    if def.states.contains_key(&def.initial) {
        machine.set_initial(&def.initial)?;
    }
    Ok(machine)
}

/// A plain state that records every time it observes the token.
pub fn polling_state(poll: Duration, observations: Arc<Mutex<Vec<bool>>>) -> StateHandle {
    StateHandle::new(
        BTreeSet::from([Outcome::from_static("done")]),
        move |_: &Blackboard, token: &CancelToken| {
            for _ in 0..1000 {
                let seen = token.is_canceled();
                observations.lock().push(seen);
                if seen {
                    return Outcome::canceled();
                }
                std::thread::sleep(poll);
            }
            Outcome::from_static("done")
        },
    )
    .unwrap()
}
