use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use super::{FsmDefinition, StateBody};
use crate::error::FsmError;
use crate::machine::StateMachine;
use crate::outcome::CANCELED;
use crate::state::StateHandle;
use crate::states::{PrimitiveRegistry, StatesError};
use crate::validate::{analyze, GraphSpec, StateSpec, ValidationIssue};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error("definition has {} issue(s)", .0.len())]
    LintFailed(Vec<ValidationIssue>),
    #[error("state `{state}`: {source}")]
    Primitive { state: String, source: StatesError },
    #[error(transparent)]
    Fsm(#[from] FsmError),
}

pub fn lint(def: &FsmDefinition) -> Vec<ValidationIssue> {
    lint_with(def, &PrimitiveRegistry::standard())
}

/// Static issues of a definition, using the same codes and paths as
/// [`StateMachine::validate`]. Primitives the registry cannot build are
/// skipped here and reported by [`build_with`].
pub fn lint_with(def: &FsmDefinition, registry: &PrimitiveRegistry) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    lint_into(def, registry, &[], &mut issues);
    issues.sort();
    issues
}

fn declared_outcomes(def: &FsmDefinition) -> BTreeSet<String> {
    def.outcomes.iter().cloned().chain([CANCELED.to_owned()]).collect()
}

fn lint_into(def: &FsmDefinition, registry: &PrimitiveRegistry, prefix: &[String], issues: &mut Vec<ValidationIssue>) {
    let declared: Vec<Option<BTreeSet<String>>> = def
        .states
        .values()
        .map(|state| match &state.body {
            StateBody::Primitive(spec) => registry
                .declared_outcomes(spec)
                .ok()
                .map(|set| set.into_iter().map(|o| o.to_string()).collect()),
            StateBody::Machine(child) => Some(declared_outcomes(child)),
        })
        .collect();
    let machine_outcomes = declared_outcomes(def);
    let spec = GraphSpec {
        machine_outcomes: machine_outcomes.iter().map(String::as_str).collect(),
        initial: Some(def.initial.as_str()),
        states: def
            .states
            .iter()
            .zip(&declared)
            .map(|((name, state), declared)| StateSpec {
                name,
                declared: declared.as_ref().map(|d| d.iter().map(String::as_str).collect()),
                transitions: state.transitions.iter().map(|(o, t)| (o.as_str(), t.as_str())).collect(),
            })
            .collect(),
    };
    analyze(&spec, prefix, issues);

    for (name, state) in &def.states {
        if let Some(child) = state.as_machine() {
            let mut path = prefix.to_vec();
            path.push(name.clone());
            lint_into(child, registry, &path, issues);
        }
    }
}

pub fn build(def: &FsmDefinition) -> Result<StateMachine, BuildError> {
    build_with(def, &PrimitiveRegistry::standard())
}

/// Builds a runnable machine. Fails with the lint issues if there are any.
pub fn build_with(def: &FsmDefinition, registry: &PrimitiveRegistry) -> Result<StateMachine, BuildError> {
    let issues = lint_with(def, registry);
    if !issues.is_empty() {
        return Err(BuildError::LintFailed(issues));
    }
    assemble(def, registry)
}

fn assemble(def: &FsmDefinition, registry: &PrimitiveRegistry) -> Result<StateMachine, BuildError> {
    let machine = StateMachine::new(def.name.as_str(), def.outcomes.iter().map(String::as_str))?;
    for (name, state) in &def.states {
        let handle = match &state.body {
            StateBody::Primitive(spec) => registry.build(spec).map_err(|source| BuildError::Primitive {
                state: name.clone(),
                source,
            })?,
            StateBody::Machine(child) => StateHandle::machine(Arc::new(assemble(child, registry)?)),
        };
        machine.add_state(name.as_str(), handle, state.transitions.iter().map(|(o, t)| (o.as_str(), t.as_str())))?;
    }
    machine.set_initial(&def.initial)?;
    Ok(machine)
}
