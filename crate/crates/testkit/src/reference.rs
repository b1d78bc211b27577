//! Direct interpreter over definition documents, used as an oracle for the
//! engine. It shares no execution code with `hsm_core`.

use std::collections::BTreeMap;

use hsm_core::definition::{FsmDefinition, StateBody};
use hsm_core::states::PrimitiveSpec;
use hsm_core::Value;

const STEP_LIMIT: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub outcome: String,
    pub visits: Vec<String>,
}

pub fn interpret(def: &FsmDefinition, board: &mut BTreeMap<String, Value>) -> Trace {
    let mut visits = Vec::new();
    let mut steps = 0;
    let outcome = run(def, board, "", &mut visits, &mut steps);
    Trace { outcome, visits }
}

fn run(def: &FsmDefinition, board: &mut BTreeMap<String, Value>, prefix: &str, visits: &mut Vec<String>, steps: &mut usize) -> String {
    let mut current = def.initial.clone();
    loop {
        *steps += 1;
        assert!(*steps < STEP_LIMIT, "reference interpreter step limit hit");
        let state = &def.states[&current];
        let path = format!("{prefix}{current}");
        let outcome = match &state.body {
            StateBody::Primitive(spec) => {
                visits.push(path);
                primitive(spec, board)
            }
            StateBody::Machine(child) => run(child, board, &format!("{path}/"), visits, steps),
        };
        let target = state.transitions.get(&outcome).cloned().unwrap_or_else(|| {
            assert_eq!(outcome, "canceled", "unmapped outcome {outcome} in {current}");
            outcome.clone()
        });
        if target == "canceled" || def.outcomes.contains(&target) {
            return target;
        }
        current = target;
    }
}

fn param<'a>(spec: &'a PrimitiveSpec, key: &str) -> &'a Value {
    &spec.params[key]
}

fn string(spec: &PrimitiveSpec, key: &str) -> String {
    match param(spec, key) {
        Value::Str(s) => s.clone(),
        other => panic!("{key} is {other:?}"),
    }
}

fn int(spec: &PrimitiveSpec, key: &str) -> i64 {
    match param(spec, key) {
        Value::Int(i) => *i,
        other => panic!("{key} is {other:?}"),
    }
}

fn primitive(spec: &PrimitiveSpec, board: &mut BTreeMap<String, Value>) -> String {
    match spec.name.as_str() {
        "set_key" => {
            board.insert(string(spec, "key"), param(spec, "value").clone());
            "done".into()
        }
        "log" | "wait_ms" => "done".into(),
        "counter" => {
            let key = string(spec, "key");
            let next = match board.get(&key) {
                Some(Value::Int(i)) => i + 1,
                _ => 1,
            };
            board.insert(key, Value::Int(next));
            if next >= int(spec, "limit") { "reached" } else { "below" }.into()
        }
        "fail_n_times" => {
            let key = string(spec, "key");
            let seen = match board.get(&key) {
                Some(Value::Int(i)) => *i,
                _ => 0,
            };
            if seen < int(spec, "n") {
                board.insert(key, Value::Int(seen + 1));
                "failed".into()
            } else {
                board.insert(key, Value::Int(seen));
                "succeeded".into()
            }
        }
        "branch_on_key" => {
            let default = string(spec, "default");
            let Some(current) = board.get(&string(spec, "key")) else {
                return default;
            };
            let cases: Vec<(Value, String)> = match param(spec, "cases") {
                Value::Map(m) => m.iter().map(|(k, v)| (Value::Str(k.clone()), v.as_str().unwrap().to_owned())).collect(),
                Value::List(items) => items
                    .iter()
                    .map(|pair| match pair {
                        Value::List(p) => (p[0].clone(), p[1].as_str().unwrap().to_owned()),
                        other => panic!("bad case {other:?}"),
                    })
                    .collect(),
                other => panic!("bad cases {other:?}"),
            };
            cases
                .into_iter()
                .find(|(v, _)| v == current)
                .map(|(_, o)| o)
                .unwrap_or(default)
        }
        other => panic!("reference interpreter has no primitive `{other}`"),
    }
}
