//! Pieces of the `hsm` executable that tests and other tools reuse: the
//! embedded demos, the primitive registry the runner uses, and the mapping
//! from outcomes to exit codes.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use hsm_core::definition::{parse_with, FsmDefinition};
use hsm_core::states::{remote_call_state, LoopbackTransport, PrimitiveRegistry, PrimitiveSpec, RemoteEndpoint, StatesError};
use hsm_core::{Blackboard, Outcome, StateHandle, Value, ABORTED, CANCELED, SUCCEEDED};

pub mod demos;

pub const EXIT_ERROR: i32 = 1;
pub const EXIT_ISSUES: i32 = 5;

/// Exit code for a final outcome.
pub fn exit_code(outcome: &str) -> i32 {
    match outcome {
        SUCCEEDED => 0,
        ABORTED => 2,
        CANCELED => 3,
        _ => 4,
    }
}

/// The standard primitives plus `remote_call`, backed by a loopback
/// transport.
pub fn registry() -> PrimitiveRegistry {
    let mut reg = PrimitiveRegistry::standard();
    reg.register("remote_call", remote_call);
    reg
}

pub fn parse_definition(text: &str) -> Result<FsmDefinition, hsm_core::definition::ParseError> {
    parse_with(text, &registry())
}

/// `remote_call` params: `address`, `timeout_ms`, `request_key` and
/// `response_key`. The reply is stored under `response_key`; a missing
/// request key sends an empty string.
fn remote_call(spec: &PrimitiveSpec) -> Result<StateHandle, StatesError> {
    let bad = |detail: String| StatesError::BadParams {
        primitive: spec.name.clone(),
        detail,
    };
    let string = |name: &str| -> Result<String, StatesError> {
        match spec.params.get(name) {
            Some(Value::Str(s)) if !s.is_empty() => Ok(s.clone()),
            Some(other) => Err(bad(format!("`{name}` must be a non-empty string, got {}", other.kind()))),
            None => Err(bad(format!("missing `{name}`"))),
        }
    };
    for key in spec.params.keys() {
        if !["address", "timeout_ms", "request_key", "response_key"].contains(&key.as_str()) {
            return Err(bad(format!("unknown parameter `{key}`")));
        }
    }
    let address = string("address")?;
    let request_key = string("request_key")?;
    let response_key = string("response_key")?;
    let timeout_ms = match spec.params.get("timeout_ms") {
        Some(Value::Int(ms)) if *ms >= 0 => *ms as u64,
        Some(_) => return Err(bad("`timeout_ms` must be a non-negative integer".into())),
        None => return Err(bad("missing `timeout_ms`".into())),
    };
    let endpoint = RemoteEndpoint::new(Arc::new(LoopbackTransport), address, Duration::from_millis(timeout_ms))?;
    remote_call_state(
        endpoint,
        move |bb: &Blackboard| bb.get(&request_key).unwrap_or_else(|_| Value::Str(String::new())),
        move |reply, bb: &Blackboard| {
            bb.set(response_key.as_str(), reply).expect("key checked non-empty");
            Outcome::from_static(SUCCEEDED)
        },
        BTreeSet::from([Outcome::from_static(SUCCEEDED)]),
    )
}

/// Parses a `key=value` blackboard seed. The value is read as JSON when it
/// parses, otherwise taken as a plain string.
pub fn parse_seed(arg: &str) -> Result<(String, Value), String> {
    let (key, raw) = arg
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{arg}`"))?;
    if key.is_empty() {
        return Err(format!("empty key in `{arg}`"));
    }
    let value = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::Str(raw.to_owned()));
    Ok((key.to_owned(), value))
}
