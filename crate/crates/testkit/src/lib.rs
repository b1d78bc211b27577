//! Oracles and fixtures shared by the hsm test suites.

pub mod fixtures;
pub mod flatten;
pub mod generate;
pub mod reference;
pub mod viewer;

use std::collections::BTreeSet;

/// Breadth-first reachability over an explicit edge list, independent of the
/// validator's graph code.
pub fn reachable_from(initial: &str, edges: &[(&str, &str)]) -> BTreeSet<String> {
    let mut seen = BTreeSet::from([initial.to_owned()]);
    let mut frontier = vec![initial.to_owned()];
    while let Some(node) = frontier.pop() {
        for (from, to) in edges {
            if *from == node && seen.insert((*to).to_owned()) {
                frontier.push((*to).to_owned());
            }
        }
    }
    seen
}
