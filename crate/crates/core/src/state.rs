use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::blackboard::Blackboard;
use crate::cancel::CancelToken;
use crate::error::FsmError;
use crate::machine::StateMachine;
use crate::outcome::Outcome;

/// Body of a plain state.
pub trait Behavior: Send + Sync {
    fn execute(&self, blackboard: &Blackboard, token: &CancelToken) -> Outcome;
}

impl<F> Behavior for F
where
    F: Fn(&Blackboard, &CancelToken) -> Outcome + Send + Sync,
{
    fn execute(&self, blackboard: &Blackboard, token: &CancelToken) -> Outcome {
        self(blackboard, token)
    }
}

#[derive(Clone)]
pub enum StateKind {
    Plain(Arc<dyn Behavior>),
    Machine(Arc<StateMachine>),
}

/// An executable unit with a fixed set of declared outcomes.
///
/// Every state may additionally return the reserved `canceled` outcome
/// without declaring it.
#[derive(Clone)]
pub struct StateHandle {
    outcomes: Arc<BTreeSet<Outcome>>,
    kind: StateKind,
}

impl StateHandle {
    pub fn new(outcomes: BTreeSet<Outcome>, behavior: impl Behavior + 'static) -> Result<Self, FsmError> {
        Self::from_arc(outcomes, Arc::new(behavior))
    }

    pub fn from_arc(outcomes: BTreeSet<Outcome>, behavior: Arc<dyn Behavior>) -> Result<Self, FsmError> {
        if outcomes.is_empty() {
            return Err(FsmError::EmptyOutcomeSet);
        }
        Ok(Self {
            outcomes: Arc::new(outcomes),
            kind: StateKind::Plain(behavior),
        })
    }

    /// Wraps a machine so it can run as a state of another machine. The
    /// declared outcomes are the machine's outcomes.
    pub fn machine(machine: Arc<StateMachine>) -> Self {
        Self {
            outcomes: Arc::new(machine.outcomes().clone()),
            kind: StateKind::Machine(machine),
        }
    }

    pub fn outcomes(&self) -> &BTreeSet<Outcome> {
        &self.outcomes
    }

    pub fn kind(&self) -> &StateKind {
        &self.kind
    }

    pub fn as_machine(&self) -> Option<&Arc<StateMachine>> {
        match &self.kind {
            StateKind::Machine(m) => Some(m),
            StateKind::Plain(_) => None,
        }
    }

    pub fn is_machine(&self) -> bool {
        self.as_machine().is_some()
    }

    /// Whether `outcome` may legally be returned by this state.
    pub fn allows(&self, outcome: &Outcome) -> bool {
        outcome.is_canceled() || self.outcomes.contains(outcome)
    }

    /// Runs the state on its own, outside of any machine.
    pub fn execute(&self, blackboard: &Blackboard, token: &CancelToken) -> Result<Outcome, FsmError> {
        let outcome = match &self.kind {
            StateKind::Plain(behavior) => behavior.execute(blackboard, token),
            StateKind::Machine(machine) => return machine.execute(blackboard, token),
        };
        if !self.allows(&outcome) {
            return Err(FsmError::StateContractViolation {
                path: Vec::new(),
                outcome: outcome.to_string(),
            });
        }
        Ok(outcome)
    }
}

impl fmt::Debug for StateHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            StateKind::Plain(_) => "plain".to_owned(),
            StateKind::Machine(m) => format!("machine({})", m.name()),
        };
        f.debug_struct("StateHandle")
            .field("outcomes", &self.outcomes)
            .field("kind", &kind)
            .finish()
    }
}
