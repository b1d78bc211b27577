//! Random definitions that are lint-clean and always terminate.
//!
//! States are ordered. Every state is first wired into a spanning tree of
//! forward edges from earlier states, which makes it reachable. Remaining
//! outcomes point forward or to a machine outcome, except `counter.below`
//! and `fail_n_times.failed`, which may also point backwards. Those two are
//! bounded by their blackboard counters (keys are unique per state), so
//! every run ends.

use std::collections::BTreeMap;

use hsm_core::definition::{FsmDefinition, StateDef};
use hsm_core::states::PrimitiveSpec;
use hsm_core::Value;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub const MAX_STATES: usize = 10;
pub const MAX_DEPTH: usize = 3;

const SHARED_KEYS: [&str; 3] = ["k0", "k1", "k2"];
const MACHINE_OUTCOMES: [&str; 3] = ["succeeded", "aborted", "finished"];

pub struct Generator {
    rng: StdRng,
    uid: usize,
    nest_probability: f64,
}

fn small_value(rng: &mut StdRng) -> Value {
    match rng.gen_range(0..4) {
        0 => Value::Int(rng.gen_range(0..3)),
        1 => Value::Str(["a", "b"][rng.gen_range(0..2)].to_owned()),
        2 => Value::Bool(rng.gen()),
        _ => Value::Real([0.5, 1.5][rng.gen_range(0..2)]),
    }
}

impl Generator {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: StdRng::seed_from_u64(seed),
            uid: 0,
            nest_probability: 0.25,
        }
    }

    /// Makes nesting more or less likely (0.0 to 1.0).
    pub fn with_nesting(mut self, probability: f64) -> Self {
        self.nest_probability = probability;
        self
    }

    fn next_uid(&mut self) -> usize {
        self.uid += 1;
        self.uid
    }

    fn primitive(&mut self) -> (PrimitiveSpec, Vec<(&'static str, bool)>) {
        let rng = &mut self.rng;
        match rng.gen_range(0..6) {
            0 => {
                let key = *SHARED_KEYS.choose(rng).unwrap();
                let value = small_value(rng);
                (
                    PrimitiveSpec::new("set_key").param("key", key).param("value", value),
                    vec![("done", false)],
                )
            }
            1 => {
                let key = *SHARED_KEYS.choose(rng).unwrap();
                let n = rng.gen_range(1..=2);
                let labels = ["c0", "c1"];
                let mut cases = Vec::new();
                for label in labels.iter().take(n) {
                    cases.push(Value::List(vec![small_value(rng), Value::from(*label)]));
                }
                let mut outcomes: Vec<(&'static str, bool)> = labels.iter().take(n).map(|l| (*l, false)).collect();
                outcomes.push(("other", false));
                (
                    PrimitiveSpec::new("branch_on_key")
                        .param("key", key)
                        .param("cases", Value::List(cases))
                        .param("default", "other"),
                    outcomes,
                )
            }
            2 => {
                let limit = self.rng.gen_range(1..=3);
                let key = format!("cnt{}", self.next_uid());
                (
                    PrimitiveSpec::new("counter").param("key", key).param("limit", limit as i64),
                    vec![("below", true), ("reached", false)],
                )
            }
            3 => {
                let n = self.rng.gen_range(0..=2);
                let key = format!("fail{}", self.next_uid());
                (
                    PrimitiveSpec::new("fail_n_times").param("key", key).param("n", n as i64),
                    vec![("failed", true), ("succeeded", false)],
                )
            }
            4 => (PrimitiveSpec::new("log").param("message", "step"), vec![("done", false)]),
            _ => (
                PrimitiveSpec::new("wait_ms").param("ms", 0i64),
                vec![("done", false)],
            ),
        }
    }

    /// A definition with at most `MAX_STATES` states per machine and at most
    /// `MAX_DEPTH` levels of machines.
    pub fn definition(&mut self) -> FsmDefinition {
        let uid = self.next_uid();
        self.machine(format!("M{uid}"), 1)
    }

    fn machine(&mut self, name: String, depth: usize) -> FsmDefinition {
        let outcome_count = self.rng.gen_range(1..=MACHINE_OUTCOMES.len());
        let outcomes: Vec<&str> = MACHINE_OUTCOMES[..outcome_count].to_vec();
        let planned = self.rng.gen_range(1..=MAX_STATES);

        // (definition, outcome slots as (label, may_go_back))
        let mut bodies: Vec<(StateDef, Vec<(&'static str, bool)>)> = Vec::new();
        for _ in 0..planned {
            if depth < MAX_DEPTH && self.rng.gen_bool(self.nest_probability) {
                let uid = self.next_uid();
                let child = self.machine(format!("M{uid}"), depth + 1);
                let slots = child
                    .outcomes
                    .iter()
                    .map(|o| (MACHINE_OUTCOMES.iter().find(|m| **m == o.as_str()).copied().unwrap(), false))
                    .collect();
                bodies.push((StateDef::machine(child), slots));
            } else {
                let (spec, slots) = self.primitive();
                bodies.push((StateDef::primitive(spec), slots));
            }
        }

        let mut targets: Vec<BTreeMap<&'static str, String>> = vec![BTreeMap::new(); planned];
        let mut count = planned;
        for j in 1..planned {
            let open: Vec<(usize, &'static str)> = (0..j)
                .flat_map(|i| {
                    let assigned = &targets[i];
                    bodies[i]
                        .1
                        .iter()
                        .filter(|(label, _)| !assigned.contains_key(label))
                        .map(move |(label, _)| (i, *label))
                        .collect::<Vec<_>>()
                })
                .collect();
            match open.choose(&mut self.rng) {
                Some(&(i, label)) => {
                    targets[i].insert(label, format!("S{j}"));
                }
                None => {
                    count = j;
                    break;
                }
            }
        }
        bodies.truncate(count);
        targets.truncate(count);

        for i in 0..count {
            let slots = bodies[i].1.clone();
            for (label, may_go_back) in slots {
                if targets[i].contains_key(label) {
                    continue;
                }
                let target = if may_go_back && self.rng.gen_bool(0.5) {
                    format!("S{}", self.rng.gen_range(0..=i))
                } else if i + 1 < count && self.rng.gen_bool(0.6) {
                    format!("S{}", self.rng.gen_range(i + 1..count))
                } else {
                    (*outcomes.choose(&mut self.rng).unwrap()).to_owned()
                };
                targets[i].insert(label, target);
            }
        }

        let mut def = FsmDefinition::new(name, outcomes.iter().copied(), "S0");
        for (i, ((body, _), table)) in bodies.into_iter().zip(targets).enumerate() {
            let mut state = body;
            for (label, target) in table {
                state = state.on(label, target);
            }
            def = def.state(format!("S{i}"), state);
        }
        def
    }
}

/// Depth of the deepest machine, counting the root as 1.
pub fn depth(def: &FsmDefinition) -> usize {
    1 + def
        .states
        .values()
        .filter_map(StateDef::as_machine)
        .map(depth)
        .max()
        .unwrap_or(0)
}
