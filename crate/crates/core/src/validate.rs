//! Static checks shared by the engine validator and the definition linter.
//!
//! Both callers lower their machine into a [`GraphSpec`] and hand it to
//! [`analyze`], so the two report the same issue codes at the same paths.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::outcome::CANCELED;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IssueCode {
    NoInitial,
    UnknownTarget,
    UnmappedOutcome,
    UnreachableState,
    NoPathToOutcome,
}

impl IssueCode {
    pub const ALL: [IssueCode; 5] = [
        IssueCode::NoInitial,
        IssueCode::UnknownTarget,
        IssueCode::UnmappedOutcome,
        IssueCode::UnreachableState,
        IssueCode::NoPathToOutcome,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::NoInitial => "NoInitial",
            IssueCode::UnknownTarget => "UnknownTarget",
            IssueCode::UnmappedOutcome => "UnmappedOutcome",
            IssueCode::UnreachableState => "UnreachableState",
            IssueCode::NoPathToOutcome => "NoPathToOutcome",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One static problem found in a machine.
///
/// `path` is the chain of state names from the root machine down to the
/// offending state; for machine-level issues it is the path of the state
/// wrapping that machine (empty for the root).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ValidationIssue {
    pub path: Vec<String>,
    pub outcome: Option<String>,
    pub code: IssueCode,
    pub message: String,
}

impl ValidationIssue {
    /// Renders the location as `A/B` or `A/B:outcome`; the root machine is `<root>`.
    pub fn location(&self) -> String {
        let mut loc = if self.path.is_empty() {
            "<root>".to_owned()
        } else {
            self.path.join("/")
        };
        if let Some(outcome) = &self.outcome {
            loc.push(':');
            loc.push_str(outcome);
        }
        loc
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.code, self.location(), self.message)
    }
}

pub(crate) struct GraphSpec<'a> {
    /// Machine outcomes, including the reserved `canceled`.
    pub machine_outcomes: BTreeSet<&'a str>,
    pub initial: Option<&'a str>,
    pub states: Vec<StateSpec<'a>>,
}

pub(crate) struct StateSpec<'a> {
    pub name: &'a str,
    /// `None` when the declared outcomes cannot be determined; the state is
    /// then exempt from outcome checks and treated as able to exit.
    pub declared: Option<BTreeSet<&'a str>>,
    pub transitions: Vec<(&'a str, &'a str)>,
}

fn at(prefix: &[String], state: &str) -> Vec<String> {
    let mut path = prefix.to_vec();
    path.push(state.to_owned());
    path
}

pub(crate) fn analyze(spec: &GraphSpec<'_>, prefix: &[String], issues: &mut Vec<ValidationIssue>) {
    let index: BTreeMap<&str, usize> = spec
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.name, i))
        .collect();
    let mut exits = vec![false; spec.states.len()];

    for (i, state) in spec.states.iter().enumerate() {
        let mapped: BTreeSet<&str> = state.transitions.iter().map(|(o, _)| *o).collect();
        match &state.declared {
            Some(declared) => {
                for outcome in declared {
                    if *outcome != CANCELED && !mapped.contains(outcome) {
                        exits[i] = true;
                        issues.push(ValidationIssue {
                            path: at(prefix, state.name),
                            outcome: Some((*outcome).to_owned()),
                            code: IssueCode::UnmappedOutcome,
                            message: format!("outcome `{outcome}` has no transition"),
                        });
                    }
                }
            }
            None => exits[i] = true,
        }
        for (outcome, target) in &state.transitions {
            let undeclared = match &state.declared {
                Some(declared) => *outcome != CANCELED && !declared.contains(outcome),
                None => false,
            };
            if undeclared {
                exits[i] = true;
                issues.push(ValidationIssue {
                    path: at(prefix, state.name),
                    outcome: Some((*outcome).to_owned()),
                    code: IssueCode::UnknownTarget,
                    message: format!("transition on `{outcome}`, which the state never returns"),
                });
            } else if spec.machine_outcomes.contains(target) {
                exits[i] = true;
            } else if !index.contains_key(target) {
                exits[i] = true;
                issues.push(ValidationIssue {
                    path: at(prefix, state.name),
                    outcome: Some((*outcome).to_owned()),
                    code: IssueCode::UnknownTarget,
                    message: format!("target `{target}` is neither a state nor a machine outcome"),
                });
            }
        }
    }

    let initial = match spec.initial {
        None => {
            issues.push(ValidationIssue {
                path: prefix.to_vec(),
                outcome: None,
                code: IssueCode::NoInitial,
                message: "machine has no initial state".to_owned(),
            });
            return;
        }
        Some(name) => match index.get(name) {
            Some(&i) => i,
            None => {
                issues.push(ValidationIssue {
                    path: prefix.to_vec(),
                    outcome: None,
                    code: IssueCode::NoInitial,
                    message: format!("initial state `{name}` does not exist"),
                });
                return;
            }
        },
    };

    let n = spec.states.len();
    let mut successors: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut predecessors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, state) in spec.states.iter().enumerate() {
        for (_, target) in &state.transitions {
            if spec.machine_outcomes.contains(target) {
                continue;
            }
            if let Some(&j) = index.get(target) {
                successors[i].push(j);
                predecessors[j].push(i);
            }
        }
    }

    let reachable = flood(&[initial], &successors);
    let exit_nodes: Vec<usize> = (0..n).filter(|&i| exits[i]).collect();
    let can_finish = flood(&exit_nodes, &predecessors);

    for (i, state) in spec.states.iter().enumerate() {
        if !reachable[i] {
            issues.push(ValidationIssue {
                path: at(prefix, state.name),
                outcome: None,
                code: IssueCode::UnreachableState,
                message: "state is not reachable from the initial state".to_owned(),
            });
        } else if !can_finish[i] {
            issues.push(ValidationIssue {
                path: at(prefix, state.name),
                outcome: None,
                code: IssueCode::NoPathToOutcome,
                message: "no machine outcome is reachable from this state".to_owned(),
            });
        }
    }
}

fn flood(seeds: &[usize], edges: &[Vec<usize>]) -> Vec<bool> {
    let mut seen = vec![false; edges.len()];
    let mut queue: VecDeque<usize> = seeds.iter().copied().collect();
    for &s in seeds {
        seen[s] = true;
    }
    while let Some(i) = queue.pop_front() {
        for &j in &edges[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}
