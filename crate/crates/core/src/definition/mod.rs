//! Declarative machine definitions.
//!
//! A definition is a JSON document:
//!
//! ```json
//! {
//!   "name": "M",
//!   "outcomes": ["succeeded"],
//!   "initial": "A",
//!   "states": {
//!     "A": {
//!       "primitive": {"type": "log", "params": {"message": "hello"}},
//!       "transitions": {"done": "succeeded"}
//!     }
//!   }
//! }
//! ```
//!
//! A state holds exactly one of `primitive` or `machine` (an inline nested
//! definition). Unknown fields and repeated keys are rejected. An unmapped
//! `canceled` outcome is routed to the machine outcome `canceled`.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::outcome::{Outcome, CANCELED};
use crate::serde_util::{unique_map, DUPLICATE_KEY};
use crate::states::{PrimitiveRegistry, PrimitiveSpec};

mod build;
mod dot;

pub use build::{build, build_with, lint, lint_with, BuildError};
pub use dot::export_dot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsmDefinition {
    pub name: String,
    pub outcomes: Vec<String>,
    pub initial: String,
    #[serde(deserialize_with = "unique_map")]
    pub states: IndexMap<String, StateDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStateDef", into = "RawStateDef")]
pub struct StateDef {
    pub body: StateBody,
    pub transitions: IndexMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateBody {
    Primitive(PrimitiveSpec),
    Machine(Box<FsmDefinition>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStateDef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    primitive: Option<PrimitiveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    machine: Option<Box<FsmDefinition>>,
    #[serde(deserialize_with = "unique_map")]
    transitions: IndexMap<String, String>,
}

impl TryFrom<RawStateDef> for StateDef {
    type Error = String;

    fn try_from(raw: RawStateDef) -> Result<Self, String> {
        let body = match (raw.primitive, raw.machine) {
            (Some(p), None) => StateBody::Primitive(p),
            (None, Some(m)) => StateBody::Machine(m),
            (Some(_), Some(_)) => return Err("state has both `primitive` and `machine`".to_owned()),
            (None, None) => return Err("state needs one of `primitive` or `machine`".to_owned()),
        };
        Ok(StateDef {
            body,
            transitions: raw.transitions,
        })
    }
}

impl From<StateDef> for RawStateDef {
    fn from(def: StateDef) -> Self {
        let (primitive, machine) = match def.body {
            StateBody::Primitive(p) => (Some(p), None),
            StateBody::Machine(m) => (None, Some(m)),
        };
        RawStateDef {
            primitive,
            machine,
            transitions: def.transitions,
        }
    }
}

impl StateDef {
    pub fn primitive(spec: PrimitiveSpec) -> Self {
        Self {
            body: StateBody::Primitive(spec),
            transitions: IndexMap::new(),
        }
    }

    pub fn machine(def: FsmDefinition) -> Self {
        Self {
            body: StateBody::Machine(Box::new(def)),
            transitions: IndexMap::new(),
        }
    }

    pub fn on(mut self, outcome: impl Into<String>, target: impl Into<String>) -> Self {
        self.transitions.insert(outcome.into(), target.into());
        self
    }

    pub fn as_machine(&self) -> Option<&FsmDefinition> {
        match &self.body {
            StateBody::Machine(m) => Some(m),
            StateBody::Primitive(_) => None,
        }
    }
}

impl FsmDefinition {
    pub fn new<I, S>(name: impl Into<String>, outcomes: I, initial: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            name: name.into(),
            outcomes: outcomes.into_iter().map(Into::into).collect(),
            initial: initial.into(),
            states: IndexMap::new(),
        }
    }

    pub fn state(mut self, name: impl Into<String>, def: StateDef) -> Self {
        self.states.insert(name.into(), def);
        self
    }

    /// Machine names of this definition and every nested one, depth first.
    pub fn machine_names(&self) -> Vec<String> {
        let mut names = vec![self.name.clone()];
        for def in self.states.values() {
            if let Some(child) = def.as_machine() {
                names.extend(child.machine_names());
            }
        }
        names
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("definitions always serialize")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {reason}")]
    SyntaxError { line: usize, column: usize, reason: String },
    #[error("schema error at {path}: {reason}")]
    SchemaError { path: String, reason: String },
    #[error("duplicate key at {path}")]
    DuplicateKey { path: String },
}

/// Parses a definition, checking primitives against the standard registry.
pub fn parse(text: &str) -> Result<FsmDefinition, ParseError> {
    parse_with(text, &PrimitiveRegistry::standard())
}

pub fn parse_with(text: &str, registry: &PrimitiveRegistry) -> Result<FsmDefinition, ParseError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let def: FsmDefinition = serde_path_to_error::deserialize(&mut de).map_err(classify)?;
    de.end().map_err(|e| ParseError::SyntaxError {
        line: e.line(),
        column: e.column(),
        reason: strip_position(&e.to_string()),
    })?;
    check_document(&def, "", registry)?;
    Ok(def)
}

fn classify(err: serde_path_to_error::Error<serde_json::Error>) -> ParseError {
    let path = err.path().to_string();
    let inner = err.into_inner();
    let reason = strip_position(&inner.to_string());
    match inner.classify() {
        serde_json::error::Category::Data => {
            if let Some(rest) = reason.strip_prefix(DUPLICATE_KEY).or_else(|| reason.strip_prefix("duplicate field")) {
                let key = rest.trim().trim_matches('`');
                return ParseError::DuplicateKey {
                    path: join_path(&path, key),
                };
            }
            ParseError::SchemaError {
                path: display_path(&path),
                reason,
            }
        }
        _ => ParseError::SyntaxError {
            line: inner.line(),
            column: inner.column(),
            reason,
        },
    }
}

fn strip_position(message: &str) -> String {
    match message.rsplit_once(" at line ") {
        Some((reason, _)) => reason.to_owned(),
        None => message.to_owned(),
    }
}

fn display_path(path: &str) -> String {
    if path.is_empty() || path == "." {
        "(document)".to_owned()
    } else {
        path.to_owned()
    }
}

fn join_path(base: &str, key: &str) -> String {
    if base.is_empty() || base == "." {
        key.to_owned()
    } else {
        format!("{base}.{key}")
    }
}

fn schema(path: String, reason: impl Into<String>) -> ParseError {
    ParseError::SchemaError {
        path,
        reason: reason.into(),
    }
}

/// Document-level rules serde cannot express.
fn check_document(def: &FsmDefinition, base: &str, registry: &PrimitiveRegistry) -> Result<(), ParseError> {
    let here = |field: &str| format!("{base}{field}");
    if def.name.trim().is_empty() {
        return Err(schema(here("name"), "name must not be empty"));
    }
    if def.outcomes.is_empty() {
        return Err(schema(here("outcomes"), "at least one outcome is required"));
    }
    for (i, label) in def.outcomes.iter().enumerate() {
        if Outcome::new(label.as_str()).is_err() {
            return Err(schema(here(&format!("outcomes[{i}]")), "outcome must not be blank"));
        }
        if def.outcomes[..i].contains(label) {
            return Err(schema(here(&format!("outcomes[{i}]")), format!("outcome `{label}` listed twice")));
        }
    }
    for (name, state) in &def.states {
        let at = here(&format!("states.{name}"));
        if name.trim().is_empty() {
            return Err(schema(at, "state name must not be blank"));
        }
        if name == CANCELED || def.outcomes.contains(name) {
            return Err(schema(at, format!("state name `{name}` shadows a machine outcome")));
        }
        for (outcome, target) in &state.transitions {
            if Outcome::new(outcome.as_str()).is_err() {
                return Err(schema(format!("{at}.transitions"), "transition outcome must not be blank"));
            }
            if target.trim().is_empty() {
                return Err(schema(format!("{at}.transitions.{outcome}"), "target must not be blank"));
            }
        }
        match &state.body {
            StateBody::Primitive(spec) => {
                registry
                    .build(spec)
                    .map_err(|e| schema(format!("{at}.primitive"), e.to_string()))?;
            }
            StateBody::Machine(child) => check_document(child, &format!("{at}.machine."), registry)?,
        }
    }
    Ok(())
}
