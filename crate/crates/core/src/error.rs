use thiserror::Error;

use crate::validate::ValidationIssue;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsmError {
    #[error("machine name must not be empty")]
    EmptyName,
    #[error("outcome set must not be empty")]
    EmptyOutcomeSet,
    #[error("invalid outcome label {0:?}")]
    InvalidOutcome(String),
    #[error("state `{0}` already exists")]
    DuplicateStateName(String),
    #[error("state name `{0}` shadows a machine outcome")]
    NameShadowsOutcome(String),
    #[error("state `{state}` does not declare outcome `{outcome}`")]
    UndeclaredOutcomeInMap { state: String, outcome: String },
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("machine `{0}` would contain itself")]
    CyclicNesting(String),
    #[error("machine is running")]
    MachineRunning,
    #[error("machine failed validation with {} issue(s)", .0.len())]
    ValidationFailed(Vec<ValidationIssue>),
    #[error("state `{}` returned undeclared outcome `{outcome}`", .path.join("/"))]
    StateContractViolation { path: Vec<String>, outcome: String },
}
