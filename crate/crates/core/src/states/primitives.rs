use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{wait_state, StatesError};
use crate::blackboard::Blackboard;
use crate::cancel::CancelToken;
use crate::outcome::Outcome;
use crate::state::StateHandle;
use crate::value::Value;

/// A named primitive and its parameters, as written in a definition file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveSpec {
    #[serde(rename = "type")]
    pub name: String,
    #[serde(default, deserialize_with = "crate::serde_util::unique_map")]
    pub params: BTreeMap<String, Value>,
}

impl PrimitiveSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.params.insert(key.into(), value.into());
        self
    }
}

pub type PrimitiveFactory = Arc<dyn Fn(&PrimitiveSpec) -> Result<StateHandle, StatesError> + Send + Sync>;

/// Named state constructors available to definition documents.
#[derive(Clone)]
pub struct PrimitiveRegistry {
    factories: BTreeMap<String, PrimitiveFactory>,
}

impl Default for PrimitiveRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

impl PrimitiveRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// The six built-in primitives: `set_key`, `wait_ms`, `branch_on_key`,
    /// `counter`, `log` and `fail_n_times`.
    pub fn standard() -> Self {
        let mut reg = Self::empty();
        reg.register("set_key", set_key);
        reg.register("wait_ms", wait_ms);
        reg.register("branch_on_key", branch_on_key);
        reg.register("counter", counter);
        reg.register("log", log_message);
        reg.register("fail_n_times", fail_n_times);
        reg
    }

    pub fn register<F>(&mut self, name: impl Into<String>, factory: F)
    where
        F: Fn(&PrimitiveSpec) -> Result<StateHandle, StatesError> + Send + Sync + 'static,
    {
        self.factories.insert(name.into(), Arc::new(factory));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(&self, spec: &PrimitiveSpec) -> Result<StateHandle, StatesError> {
        let factory = self
            .factories
            .get(&spec.name)
            .ok_or_else(|| StatesError::UnknownPrimitive(spec.name.clone()))?;
        factory(spec)
    }

    /// Outcomes the primitive would declare. Constructors are pure, so this
    /// builds the state and discards it.
    pub fn declared_outcomes(&self, spec: &PrimitiveSpec) -> Result<BTreeSet<Outcome>, StatesError> {
        self.build(spec).map(|s| s.outcomes().clone())
    }
}

pub fn build_primitive(spec: &PrimitiveSpec) -> Result<StateHandle, StatesError> {
    PrimitiveRegistry::standard().build(spec)
}

/// Typed access to a primitive's parameters; `finish` rejects leftovers.
struct Params<'a> {
    spec: &'a PrimitiveSpec,
    taken: BTreeSet<&'a str>,
}

impl<'a> Params<'a> {
    fn new(spec: &'a PrimitiveSpec) -> Self {
        Self {
            spec,
            taken: BTreeSet::new(),
        }
    }

    fn bad(&self, detail: impl Into<String>) -> StatesError {
        StatesError::BadParams {
            primitive: self.spec.name.clone(),
            detail: detail.into(),
        }
    }

    fn optional(&mut self, key: &'a str) -> Option<&'a Value> {
        self.taken.insert(key);
        self.spec.params.get(key)
    }

    fn value(&mut self, key: &'a str) -> Result<&'a Value, StatesError> {
        self.optional(key)
            .ok_or_else(|| self.bad(format!("missing parameter `{key}`")))
    }

    fn string(&mut self, key: &'a str) -> Result<&'a str, StatesError> {
        let v = self.value(key)?;
        v.as_str()
            .ok_or_else(|| self.bad(format!("`{key}` must be a string, got {}", v.kind())))
    }

    fn key(&mut self, key: &'a str) -> Result<String, StatesError> {
        let s = self.string(key)?;
        if s.is_empty() {
            return Err(self.bad(format!("`{key}` must not be empty")));
        }
        Ok(s.to_owned())
    }

    fn outcome(&mut self, key: &'a str) -> Result<Outcome, StatesError> {
        let s = self.string(key)?;
        Outcome::new(s).map_err(|_| self.bad(format!("`{key}` is not a valid outcome")))
    }

    fn non_negative(&mut self, key: &'a str, value: Option<&'a Value>) -> Result<Option<u64>, StatesError> {
        match value {
            None => Ok(None),
            Some(v) => {
                let n = v
                    .as_int()
                    .ok_or_else(|| self.bad(format!("`{key}` must be an integer, got {}", v.kind())))?;
                u64::try_from(n)
                    .map(Some)
                    .map_err(|_| self.bad(format!("`{key}` must not be negative")))
            }
        }
    }

    fn count(&mut self, key: &'a str) -> Result<u64, StatesError> {
        let v = self.value(key)?;
        Ok(self.non_negative(key, Some(v))?.unwrap_or_default())
    }

    fn integer(&mut self, key: &'a str) -> Result<i64, StatesError> {
        let v = self.value(key)?;
        v.as_int()
            .ok_or_else(|| self.bad(format!("`{key}` must be an integer, got {}", v.kind())))
    }

    fn finish(self) -> Result<(), StatesError> {
        match self.spec.params.keys().find(|k| !self.taken.contains(k.as_str())) {
            Some(extra) => Err(self.bad(format!("unknown parameter `{extra}`"))),
            None => Ok(()),
        }
    }
}

fn outcomes<const N: usize>(labels: [&'static str; N]) -> BTreeSet<Outcome> {
    labels.into_iter().map(Outcome::from_static).collect()
}

fn set_key(spec: &PrimitiveSpec) -> Result<StateHandle, StatesError> {
    let mut p = Params::new(spec);
    let key = p.key("key")?;
    let value = p.value("value")?.clone();
    p.finish()?;
    let handle = StateHandle::new(outcomes(["done"]), move |bb: &Blackboard, token: &CancelToken| {
        if token.is_canceled() {
            return Outcome::canceled();
        }
        bb.set(key.as_str(), value.clone()).expect("key checked non-empty");
        Outcome::from_static("done")
    })?;
    Ok(handle)
}

fn wait_ms(spec: &PrimitiveSpec) -> Result<StateHandle, StatesError> {
    let mut p = Params::new(spec);
    let ms = p.count("ms")?;
    let poll = p.optional("poll_ms");
    let poll = p.non_negative("poll_ms", poll)?.unwrap_or_else(|| ms.min(100));
    p.finish()?;
    wait_state(ms, poll)
}

/// `cases` is either an object matching string values, or a list of
/// `[value, outcome]` pairs matching any value.
fn branch_on_key(spec: &PrimitiveSpec) -> Result<StateHandle, StatesError> {
    let mut p = Params::new(spec);
    let key = p.key("key")?;
    let default = p.outcome("default")?;
    let raw = p.value("cases")?;
    let mut cases: Vec<(Value, Outcome)> = Vec::new();
    match raw {
        Value::Map(map) => {
            for (k, v) in map {
                let label = v.as_str().ok_or_else(|| p.bad(format!("case `{k}` must map to an outcome string")))?;
                let outcome = Outcome::new(label).map_err(|_| p.bad(format!("case `{k}` has an invalid outcome")))?;
                cases.push((Value::Str(k.clone()), outcome));
            }
        }
        Value::List(items) => {
            for (i, item) in items.iter().enumerate() {
                let pair = match item.as_list() {
                    Some([value, Value::Str(label)]) => (value, label),
                    _ => return Err(p.bad(format!("cases[{i}] must be a [value, outcome] pair"))),
                };
                let outcome = Outcome::new(pair.1.as_str()).map_err(|_| p.bad(format!("cases[{i}] has an invalid outcome")))?;
                cases.push((pair.0.clone(), outcome));
            }
        }
        other => return Err(p.bad(format!("`cases` must be a mapping or a list, got {}", other.kind()))),
    }
    p.finish()?;

    let mut declared: BTreeSet<Outcome> = cases.iter().map(|(_, o)| o.clone()).collect();
    declared.insert(default.clone());
    let handle = StateHandle::new(declared, move |bb: &Blackboard, token: &CancelToken| {
        if token.is_canceled() {
            return Outcome::canceled();
        }
        let Ok(current) = bb.get(&key) else {
            return default.clone();
        };
        cases
            .iter()
            .find(|(value, _)| *value == current)
            .map(|(_, outcome)| outcome.clone())
            .unwrap_or_else(|| default.clone())
    })?;
    Ok(handle)
}

/// Increments an integer key (missing or non-integer counts as 0) and
/// reports `reached` once it is at least `limit`.
fn counter(spec: &PrimitiveSpec) -> Result<StateHandle, StatesError> {
    let mut p = Params::new(spec);
    let key = p.key("key")?;
    let limit = p.integer("limit")?;
    p.finish()?;
    let handle = StateHandle::new(outcomes(["below", "reached"]), move |bb: &Blackboard, token: &CancelToken| {
        if token.is_canceled() {
            return Outcome::canceled();
        }
        let count = bb
            .update(&key, |v| {
                let next = v.and_then(Value::as_int).unwrap_or(0).saturating_add(1);
                (Value::Int(next), next)
            })
            .expect("key checked non-empty");
        if count >= limit {
            Outcome::from_static("reached")
        } else {
            Outcome::from_static("below")
        }
    })?;
    Ok(handle)
}

fn log_message(spec: &PrimitiveSpec) -> Result<StateHandle, StatesError> {
    let mut p = Params::new(spec);
    let message = p.string("message")?.to_owned();
    p.finish()?;
    let handle = StateHandle::new(outcomes(["done"]), move |_: &Blackboard, _: &CancelToken| {
        log::info!("{message}");
        Outcome::from_static("done")
    })?;
    Ok(handle)
}

/// Returns `failed` for the first `n` runs (tracked under `key`), then
/// `succeeded` forever.
fn fail_n_times(spec: &PrimitiveSpec) -> Result<StateHandle, StatesError> {
    let mut p = Params::new(spec);
    let key = p.key("key")?;
    let n = p.count("n")?;
    p.finish()?;
    let n = i64::try_from(n).unwrap_or(i64::MAX);
    let handle = StateHandle::new(outcomes(["failed", "succeeded"]), move |bb: &Blackboard, token: &CancelToken| {
        if token.is_canceled() {
            return Outcome::canceled();
        }
        let failed = bb
            .update(&key, |v| {
                let seen = v.and_then(Value::as_int).unwrap_or(0);
                if seen < n {
                    (Value::Int(seen + 1), true)
                } else {
                    (Value::Int(seen), false)
                }
            })
            .expect("key checked non-empty");
        Outcome::from_static(if failed { "failed" } else { "succeeded" })
    })?;
    Ok(handle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(state: &StateHandle, bb: &Blackboard) -> String {
        state.execute(bb, &CancelToken::new()).unwrap().to_string()
    }

    #[test]
    fn goal_routing() {
        let bb = Blackboard::new();
        let set = build_primitive(
            &PrimitiveSpec::new("set_key")
                .param("key", "goal")
                .param("value", "check waypoint one"),
        )
        .unwrap();
        let mut cases = BTreeMap::new();
        cases.insert("check waypoint one".to_owned(), Value::from("go"));
        let branch = build_primitive(
            &PrimitiveSpec::new("branch_on_key")
                .param("key", "goal")
                .param("cases", Value::Map(cases))
                .param("default", "skip"),
        )
        .unwrap();
        assert_eq!(run(&set, &bb), "done");
        assert_eq!(run(&branch, &bb), "go");
    }

    #[test]
    fn branch_declares_cases_and_default() {
        let spec = PrimitiveSpec::new("branch_on_key")
            .param("key", "k")
            .param(
                "cases",
                Value::List(vec![
                    Value::List(vec![Value::Int(1), "one".into()]),
                    Value::List(vec![Value::Bool(true), "yes".into()]),
                ]),
            )
            .param("default", "other");
        let state = build_primitive(&spec).unwrap();
        let declared: Vec<_> = state.outcomes().iter().map(Outcome::as_str).collect();
        assert_eq!(declared, ["one", "other", "yes"]);

        let bb = Blackboard::new();
        assert_eq!(run(&state, &bb), "other");
        bb.set("k", 1).unwrap();
        assert_eq!(run(&state, &bb), "one");
        bb.set("k", true).unwrap();
        assert_eq!(run(&state, &bb), "yes");
        bb.set("k", 1.0).unwrap();
        assert_eq!(run(&state, &bb), "other");
    }

    #[test]
    fn counter_trace() {
        let state = build_primitive(&PrimitiveSpec::new("counter").param("key", "i").param("limit", 3)).unwrap();
        let bb = Blackboard::new();
        let trace: Vec<_> = (0..3).map(|_| run(&state, &bb)).collect();
        assert_eq!(trace, ["below", "below", "reached"]);
        assert_eq!(bb.get("i").unwrap(), Value::Int(3));
    }

    #[test]
    fn fail_n_times_then_succeeds() {
        let state = build_primitive(&PrimitiveSpec::new("fail_n_times").param("key", "f").param("n", 2)).unwrap();
        let bb = Blackboard::new();
        let trace: Vec<_> = (0..5).map(|_| run(&state, &bb)).collect();
        assert_eq!(trace, ["failed", "failed", "succeeded", "succeeded", "succeeded"]);
    }

    #[test]
    fn unknown_primitive_is_named() {
        let err = build_primitive(&PrimitiveSpec::new("teleport")).unwrap_err();
        assert_eq!(err, StatesError::UnknownPrimitive("teleport".into()));
        assert!(err.to_string().contains("teleport"));
    }

    #[test]
    fn bad_params() {
        let cases = [
            PrimitiveSpec::new("set_key").param("key", "k"),
            PrimitiveSpec::new("set_key").param("key", "").param("value", 1),
            PrimitiveSpec::new("set_key").param("key", "k").param("value", 1).param("extra", 2),
            PrimitiveSpec::new("counter").param("key", "k").param("limit", "3"),
            PrimitiveSpec::new("wait_ms").param("ms", -5),
            PrimitiveSpec::new("fail_n_times").param("key", "k").param("n", 1.5),
            PrimitiveSpec::new("branch_on_key").param("key", "k").param("cases", 3).param("default", "d"),
            PrimitiveSpec::new("log"),
        ];
        for spec in cases {
            let err = build_primitive(&spec).unwrap_err();
            assert!(matches!(err, StatesError::BadParams { .. }), "{spec:?} gave {err:?}");
        }
    }

    #[test]
    fn wait_defaults_poll() {
        let state = build_primitive(&PrimitiveSpec::new("wait_ms").param("ms", 0)).unwrap();
        assert_eq!(run(&state, &Blackboard::new()), "done");
        let err = build_primitive(&PrimitiveSpec::new("wait_ms").param("ms", 100).param("poll_ms", 0)).unwrap_err();
        assert!(matches!(err, StatesError::InvalidDuration { .. }));
    }

    #[test]
    fn side_effects_wait_for_token() {
        let token = CancelToken::new();
        token.cancel();
        let bb = Blackboard::new();
        for spec in [
            PrimitiveSpec::new("set_key").param("key", "k").param("value", 1),
            PrimitiveSpec::new("counter").param("key", "k").param("limit", 1),
            PrimitiveSpec::new("fail_n_times").param("key", "k").param("n", 1),
        ] {
            let state = build_primitive(&spec).unwrap();
            assert!(state.execute(&bb, &token).unwrap().is_canceled());
        }
        assert!(bb.is_empty());
    }
}
