//! Hierarchical state machine runtime.
//!
//! States return outcomes, outcomes select transitions, and a whole machine
//! can run as a state of another machine. Every state of one execution
//! shares a [`Blackboard`] and a [`CancelToken`].
//!
//! ```
//! use hsm_core::{Blackboard, CancelToken, StateMachine, states};
//!
//! let machine = StateMachine::new("M", ["succeeded"]).unwrap();
//! machine.add_state("WAIT", states::wait_state(0, 0).unwrap(), [("done", "succeeded")]).unwrap();
//! let outcome = machine.execute(&Blackboard::new(), &CancelToken::new()).unwrap();
//! assert_eq!(outcome, "succeeded");
//! ```

mod blackboard;
mod cancel;
pub mod definition;
mod error;
mod machine;
mod outcome;
mod serde_util;
mod state;
pub mod states;
mod validate;
mod value;

pub use blackboard::{Blackboard, BlackboardError};
pub use cancel::CancelToken;
pub use error::FsmError;
pub use machine::{ExecutionObserver, ExecutionStatus, MachineLayout, StateLayout, StateMachine, VisitRecorder};
pub use outcome::{outcome_set, Outcome, ABORTED, CANCELED, SUCCEEDED};
pub use state::{Behavior, StateHandle, StateKind};
pub use validate::{IssueCode, ValidationIssue};
pub use value::Value;
