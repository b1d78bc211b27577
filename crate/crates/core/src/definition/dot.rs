//! Graphviz rendering of definitions.
//!
//! Each machine is a cluster, nested machines are nested clusters, states are
//! boxes and machine outcomes are double circles. Node ids are state paths
//! rooted at the top machine name (`M/A/B`); outcome nodes append `:outcome`
//! to the owning machine's path. States and outcomes are emitted in sorted
//! order so the output is byte-stable.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::FsmDefinition;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn outcome_node(machine_path: &str, outcome: &str) -> String {
    format!("{machine_path}:{outcome}")
}

fn sorted_states(def: &FsmDefinition) -> Vec<(&String, &super::StateDef)> {
    let mut states: Vec<_> = def.states.iter().collect();
    states.sort_by(|a, b| a.0.cmp(b.0));
    states
}

fn terminal_outcomes(def: &FsmDefinition) -> BTreeSet<&str> {
    let mut outcomes: BTreeSet<&str> = def.outcomes.iter().map(String::as_str).collect();
    // An explicit transition to `canceled` needs a node even when the
    // outcome is only implicit.
    for state in def.states.values() {
        for target in state.transitions.values() {
            if target == crate::outcome::CANCELED {
                outcomes.insert(target);
            }
        }
    }
    outcomes
}

/// Node an edge into state `name` of the machine at `path` should land on:
/// the state itself, or the initial leaf of a nested machine.
fn entry_node(def: &FsmDefinition, path: &str, name: &str) -> (String, Option<String>) {
    let node = format!("{path}/{name}");
    match def.states.get(name).and_then(|s| s.as_machine()) {
        Some(child) => {
            let cluster = format!("cluster_{node}");
            let (inner, _) = entry_node(child, &node, &child.initial);
            (inner, Some(cluster))
        }
        None => (node, None),
    }
}

struct Edge {
    from: String,
    to: String,
    label: String,
    ltail: Option<String>,
    lhead: Option<String>,
}

fn render_machine(def: &FsmDefinition, path: &str, depth: usize, out: &mut String, edges: &mut Vec<Edge>) {
    let pad = "  ".repeat(depth);
    let _ = writeln!(out, "{pad}subgraph {} {{", quote(&format!("cluster_{path}")));
    let _ = writeln!(out, "{pad}  label={};", quote(&def.name));

    let outcomes = terminal_outcomes(def);
    for (name, state) in sorted_states(def) {
        let node = format!("{path}/{name}");
        match state.as_machine() {
            Some(child) => render_machine(child, &node, depth + 1, out, edges),
            None => {
                let bold = if *name == def.initial { ", penwidth=2" } else { "" };
                let _ = writeln!(out, "{pad}  {} [label={}{bold}];", quote(&node), quote(name));
            }
        }

        let mut transitions: Vec<_> = state.transitions.iter().collect();
        transitions.sort();
        for (outcome, target) in transitions {
            let (from, ltail) = match state.as_machine() {
                Some(_) => (outcome_node(&node, outcome), Some(format!("cluster_{node}"))),
                None => (node.clone(), None),
            };
            let (to, lhead) = if outcomes.contains(target.as_str()) {
                (outcome_node(path, target), None)
            } else {
                entry_node(def, path, target)
            };
            edges.push(Edge {
                from,
                to,
                label: outcome.clone(),
                ltail,
                lhead,
            });
        }
    }
    for outcome in outcomes {
        let _ = writeln!(
            out,
            "{pad}  {} [label={}, shape=doublecircle];",
            quote(&outcome_node(path, outcome)),
            quote(outcome)
        );
    }
    let _ = writeln!(out, "{pad}}}");
}

/// Renders a definition as Graphviz DOT.
pub fn export_dot(def: &FsmDefinition) -> String {
    let mut out = String::new();
    let mut edges = Vec::new();
    let _ = writeln!(out, "digraph {} {{", quote(&def.name));
    out.push_str("  compound=true;\n");
    out.push_str("  node [shape=box, style=rounded];\n");
    render_machine(def, &def.name, 1, &mut out, &mut edges);
    for edge in edges {
        let mut attrs = format!("label={}", quote(&edge.label));
        if let Some(tail) = edge.ltail {
            let _ = write!(attrs, ", ltail={}", quote(&tail));
        }
        if let Some(head) = edge.lhead {
            let _ = write!(attrs, ", lhead={}", quote(&head));
        }
        let _ = writeln!(out, "  {} -> {} [{attrs}];", quote(&edge.from), quote(&edge.to));
    }
    out.push_str("}\n");
    out
}
