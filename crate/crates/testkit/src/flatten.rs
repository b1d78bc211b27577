//! Mechanical flattening of nested definitions.
//!
//! A state `P` wrapping machine `C` is replaced by `C`'s states renamed
//! `P/<name>`. Transitions of `C` that end in a `C` outcome are redirected
//! through `P`'s own transition for that outcome; transitions into `P` land
//! on `C`'s (flattened) initial state.
//!
//! A child may declare an outcome it never produces, which leaves parent
//! states that look reachable in the nested document but not in the flat
//! one. Those states can never run and are dropped.

use hsm_core::definition::{FsmDefinition, StateBody, StateDef};

use crate::reachable_from;

pub fn flatten(def: &FsmDefinition) -> FsmDefinition {
    prune(inline(def))
}

fn prune(mut def: FsmDefinition) -> FsmDefinition {
    let edges: Vec<(&str, &str)> = def
        .states
        .iter()
        .flat_map(|(n, s)| s.transitions.values().map(move |t| (n.as_str(), t.as_str())))
        .collect();
    let keep = reachable_from(&def.initial, &edges);
    def.states.retain(|name, _| keep.contains(name));
    def
}

fn inline(def: &FsmDefinition) -> FsmDefinition {
    let flat_children: Vec<Option<FsmDefinition>> = def
        .states
        .values()
        .map(|s| s.as_machine().map(inline))
        .collect();
    let entry = |target: &str| -> String {
        match def.states.get_index_of(target) {
            Some(i) => match &flat_children[i] {
                Some(child) => format!("{target}/{}", child.initial),
                None => target.to_owned(),
            },
            None => target.to_owned(),
        }
    };

    let mut out = FsmDefinition::new(def.name.clone(), def.outcomes.clone(), entry(&def.initial));
    for ((name, state), flat) in def.states.iter().zip(&flat_children) {
        match (&state.body, flat) {
            (StateBody::Primitive(spec), _) => {
                let mut s = StateDef::primitive(spec.clone());
                for (o, t) in &state.transitions {
                    s = s.on(o.clone(), entry(t));
                }
                out = out.state(name.clone(), s);
            }
            (StateBody::Machine(_), Some(child)) => {
                for (child_name, child_state) in &child.states {
                    let StateBody::Primitive(spec) = &child_state.body else {
                        unreachable!("flattened children contain only primitives");
                    };
                    let mut s = StateDef::primitive(spec.clone());
                    for (o, t) in &child_state.transitions {
                        let target = if child.outcomes.contains(t) || t == "canceled" {
                            match state.transitions.get(t) {
                                Some(parent_target) => entry(parent_target),
                                None => "canceled".to_owned(),
                            }
                        } else {
                            format!("{name}/{t}")
                        };
                        s = s.on(o.clone(), target);
                    }
                    out = out.state(format!("{name}/{child_name}"), s);
                }
            }
            (StateBody::Machine(_), None) => unreachable!(),
        }
    }
    out
}
