//! Machine construction and hierarchical execution.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use indexmap::IndexMap;
use parking_lot::{Mutex, RwLock};

use crate::blackboard::Blackboard;
use crate::cancel::CancelToken;
use crate::error::FsmError;
use crate::outcome::{Outcome, CANCELED};
use crate::state::{StateHandle, StateKind};
use crate::validate::{analyze, GraphSpec, StateSpec, ValidationIssue};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecutionStatus {
    Idle,
    /// Active state names, outermost first. Never empty.
    Running(Vec<String>),
    Finished(Outcome),
    Canceled,
}

impl ExecutionStatus {
    pub fn is_running(&self) -> bool {
        matches!(self, ExecutionStatus::Running(_))
    }
}

/// Hooks invoked as an execution enters and leaves states. `path` is the
/// full state path from the machine passed to `execute_observed`.
pub trait ExecutionObserver {
    fn state_entered(&mut self, _path: &[String], _leaf: bool) {}
    fn state_exited(&mut self, _path: &[String], _outcome: &Outcome) {}
}

struct NoObserver;

impl ExecutionObserver for NoObserver {}

/// Records the sequence of leaf states entered, each as a `/`-joined path.
#[derive(Debug, Default, Clone)]
pub struct VisitRecorder {
    pub visits: Vec<String>,
}

impl ExecutionObserver for VisitRecorder {
    fn state_entered(&mut self, path: &[String], leaf: bool) {
        if leaf {
            self.visits.push(path.join("/"));
        }
    }
}

#[derive(Default)]
struct Graph {
    states: IndexMap<String, StateHandle>,
    transitions: IndexMap<String, BTreeMap<Outcome, String>>,
    initial: Option<String>,
}

/// Static shape of a machine, sorted by state name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineLayout {
    pub name: String,
    pub outcomes: Vec<String>,
    pub initial: Option<String>,
    pub states: Vec<StateLayout>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateLayout {
    pub name: String,
    pub outcomes: Vec<String>,
    pub transitions: BTreeMap<String, String>,
    pub child: Option<Box<MachineLayout>>,
}

/// Status cell of an enclosing machine, plus the path from that machine down
/// to the state currently running the inner machine.
struct Sink {
    cell: Arc<Mutex<ExecutionStatus>>,
    prefix: Vec<String>,
}

impl Sink {
    fn show(&self, tail: Option<&str>) {
        let mut path = self.prefix.clone();
        path.extend(tail.map(str::to_owned));
        *self.cell.lock() = ExecutionStatus::Running(path);
    }
}

struct RunCtx<'a> {
    blackboard: &'a Blackboard,
    token: &'a CancelToken,
    observer: &'a mut dyn ExecutionObserver,
    sinks: Vec<Sink>,
    path: Vec<String>,
}

/// Resets the status to idle unless the run reached a final status.
struct RunGuard<'a> {
    status: &'a Mutex<ExecutionStatus>,
    settled: bool,
}

impl Drop for RunGuard<'_> {
    fn drop(&mut self) {
        if !self.settled {
            *self.status.lock() = ExecutionStatus::Idle;
        }
    }
}

/// A named set of states joined by outcome-triggered transitions.
///
/// Machines are built through `&self` methods so that a machine can be
/// shared (for monitoring or nesting) while it is still being assembled.
/// Structural changes are refused while the machine is running.
pub struct StateMachine {
    name: String,
    outcomes: BTreeSet<Outcome>,
    graph: RwLock<Graph>,
    status: Arc<Mutex<ExecutionStatus>>,
}

impl StateMachine {
    /// Creates an empty machine. The reserved `canceled` outcome is always
    /// added to `outcomes`.
    pub fn new<I, S>(name: impl Into<String>, outcomes: I) -> Result<Self, FsmError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(FsmError::EmptyName);
        }
        let mut set = outcomes
            .into_iter()
            .map(Outcome::new)
            .collect::<Result<BTreeSet<_>, _>>()?;
        if set.is_empty() {
            return Err(FsmError::EmptyOutcomeSet);
        }
        set.insert(Outcome::canceled());
        Ok(Self {
            name,
            outcomes: set,
            graph: RwLock::new(Graph::default()),
            status: Arc::new(Mutex::new(ExecutionStatus::Idle)),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Machine-level outcomes, including `canceled`.
    pub fn outcomes(&self) -> &BTreeSet<Outcome> {
        &self.outcomes
    }

    pub fn add_state<I, O, T>(&self, name: impl Into<String>, state: StateHandle, transitions: I) -> Result<(), FsmError>
    where
        I: IntoIterator<Item = (O, T)>,
        O: Into<String>,
        T: Into<String>,
    {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(FsmError::EmptyName);
        }
        if self.outcomes.contains(name.as_str()) {
            return Err(FsmError::NameShadowsOutcome(name));
        }
        let mut table = BTreeMap::new();
        for (outcome, target) in transitions {
            let outcome = Outcome::new(outcome)?;
            if !state.allows(&outcome) {
                return Err(FsmError::UndeclaredOutcomeInMap {
                    state: name,
                    outcome: outcome.to_string(),
                });
            }
            table.insert(outcome, target.into());
        }
        if let Some(child) = state.as_machine() {
            if self.nests(child) {
                return Err(FsmError::CyclicNesting(child.name().to_owned()));
            }
        }

        let status = self.status.lock();
        if status.is_running() {
            return Err(FsmError::MachineRunning);
        }
        let mut graph = self.graph.write();
        if graph.states.contains_key(&name) {
            return Err(FsmError::DuplicateStateName(name));
        }
        if graph.initial.is_none() {
            graph.initial = Some(name.clone());
        }
        graph.transitions.insert(name.clone(), table);
        graph.states.insert(name, state);
        Ok(())
    }

    fn nests(&self, candidate: &Arc<StateMachine>) -> bool {
        if std::ptr::eq(self, Arc::as_ptr(candidate)) {
            return true;
        }
        candidate.children().iter().any(|(_, c)| self.nests(c))
    }

    pub fn set_initial(&self, name: &str) -> Result<(), FsmError> {
        let status = self.status.lock();
        if status.is_running() {
            return Err(FsmError::MachineRunning);
        }
        let mut graph = self.graph.write();
        if !graph.states.contains_key(name) {
            return Err(FsmError::UnknownState(name.to_owned()));
        }
        graph.initial = Some(name.to_owned());
        Ok(())
    }

    pub fn initial(&self) -> Option<String> {
        self.graph.read().initial.clone()
    }

    /// State names in insertion order.
    pub fn state_names(&self) -> Vec<String> {
        self.graph.read().states.keys().cloned().collect()
    }

    pub fn state(&self, name: &str) -> Option<StateHandle> {
        self.graph.read().states.get(name).cloned()
    }

    pub fn transitions(&self, state: &str) -> Option<BTreeMap<Outcome, String>> {
        self.graph.read().transitions.get(state).cloned()
    }

    fn children(&self) -> Vec<(String, Arc<StateMachine>)> {
        self.graph
            .read()
            .states
            .iter()
            .filter_map(|(n, s)| s.as_machine().map(|m| (n.clone(), Arc::clone(m))))
            .collect()
    }

    /// Every machine nested below this one, depth first.
    pub fn nested_machines(&self) -> Vec<Arc<StateMachine>> {
        let mut out = Vec::new();
        for (_, child) in self.children() {
            out.push(Arc::clone(&child));
            out.extend(child.nested_machines());
        }
        out
    }

    /// Finds this machine or a nested one by machine name.
    pub fn find_machine(&self, name: &str) -> Option<Arc<StateMachine>> {
        self.nested_machines().into_iter().find(|m| m.name() == name)
    }

    pub fn status(&self) -> ExecutionStatus {
        self.status.lock().clone()
    }

    /// Active path, outermost first, or empty when not running.
    pub fn current_path(&self) -> Vec<String> {
        match &*self.status.lock() {
            ExecutionStatus::Running(path) => path.clone(),
            _ => Vec::new(),
        }
    }

    pub fn layout(&self) -> MachineLayout {
        let graph = self.graph.read();
        let states = graph
            .states
            .iter()
            .map(|(name, handle)| (name.clone(), handle.clone(), graph.transitions[name].clone()))
            .collect::<Vec<_>>();
        let initial = graph.initial.clone();
        drop(graph);

        let mut states: Vec<StateLayout> = states
            .into_iter()
            .map(|(name, handle, table)| StateLayout {
                name,
                outcomes: handle.outcomes().iter().map(|o| o.to_string()).collect(),
                transitions: table.into_iter().map(|(o, t)| (o.to_string(), t)).collect(),
                child: handle.as_machine().map(|m| Box::new(m.layout())),
            })
            .collect();
        states.sort_by(|a, b| a.name.cmp(&b.name));
        MachineLayout {
            name: self.name.clone(),
            outcomes: self.outcomes.iter().map(|o| o.to_string()).collect(),
            initial,
            states,
        }
    }

    /// Status and layout captured together; the structure cannot change
    /// between the two reads.
    pub fn observe(&self) -> (ExecutionStatus, MachineLayout) {
        let status = self.status.lock();
        let layout = self.layout();
        (status.clone(), layout)
    }

    /// Returns every static issue, sorted, recursing into nested machines.
    pub fn validate(&self) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();
        self.validate_into(&[], &mut issues);
        issues.sort();
        issues
    }

    fn validate_into(&self, prefix: &[String], issues: &mut Vec<ValidationIssue>) {
        let children = {
            let graph = self.graph.read();
            let spec = GraphSpec {
                machine_outcomes: self.outcomes.iter().map(Outcome::as_str).collect(),
                initial: graph.initial.as_deref(),
                states: graph
                    .states
                    .iter()
                    .map(|(name, handle)| StateSpec {
                        name,
                        declared: Some(handle.outcomes().iter().map(Outcome::as_str).collect()),
                        transitions: graph.transitions[name]
                            .iter()
                            .map(|(o, t)| (o.as_str(), t.as_str()))
                            .collect(),
                    })
                    .collect(),
            };
            analyze(&spec, prefix, issues);
            drop(spec);
            drop(graph);
            self.children()
        };
        for (state, child) in children {
            let mut path = prefix.to_vec();
            path.push(state);
            child.validate_into(&path, issues);
        }
    }

    /// Runs the machine from its initial state until it reaches a machine
    /// outcome. Returns `canceled` if `token` is set while running.
    pub fn execute(&self, blackboard: &Blackboard, token: &CancelToken) -> Result<Outcome, FsmError> {
        self.execute_observed(blackboard, token, &mut NoObserver)
    }

    pub fn execute_observed(
        &self,
        blackboard: &Blackboard,
        token: &CancelToken,
        observer: &mut dyn ExecutionObserver,
    ) -> Result<Outcome, FsmError> {
        let mut ctx = RunCtx {
            blackboard,
            token,
            observer,
            sinks: Vec::new(),
            path: Vec::new(),
        };
        self.run(&mut ctx)
    }

    fn run(&self, ctx: &mut RunCtx<'_>) -> Result<Outcome, FsmError> {
        let issues = self.validate();
        if !issues.is_empty() {
            return Err(FsmError::ValidationFailed(issues));
        }
        let initial = self.initial().ok_or(FsmError::ValidationFailed(Vec::new()))?;
        {
            let mut status = self.status.lock();
            if status.is_running() {
                return Err(FsmError::MachineRunning);
            }
            *status = ExecutionStatus::Running(vec![initial.clone()]);
        }
        let mut guard = RunGuard {
            status: &self.status,
            settled: false,
        };

        let mut current = initial;
        let outcome = loop {
            if ctx.token.is_canceled() {
                break Outcome::canceled();
            }
            let (handle, table) = {
                let graph = self.graph.read();
                (graph.states[&current].clone(), graph.transitions[&current].clone())
            };
            *self.status.lock() = ExecutionStatus::Running(vec![current.clone()]);
            for sink in &ctx.sinks {
                sink.show(Some(&current));
            }

            ctx.path.push(current.clone());
            ctx.observer.state_entered(&ctx.path, !handle.is_machine());
            let returned = match handle.kind() {
                StateKind::Plain(behavior) => behavior.execute(ctx.blackboard, ctx.token),
                StateKind::Machine(child) => {
                    let mut inner: Vec<Sink> = ctx
                        .sinks
                        .iter()
                        .map(|s| {
                            let mut prefix = s.prefix.clone();
                            prefix.push(current.clone());
                            Sink {
                                cell: Arc::clone(&s.cell),
                                prefix,
                            }
                        })
                        .collect();
                    inner.push(Sink {
                        cell: Arc::clone(&self.status),
                        prefix: vec![current.clone()],
                    });
                    let outer = std::mem::replace(&mut ctx.sinks, inner);
                    let result = child.run(ctx);
                    ctx.sinks = outer;
                    result?
                }
            };
            if !handle.allows(&returned) {
                return Err(FsmError::StateContractViolation {
                    path: ctx.path.clone(),
                    outcome: returned.to_string(),
                });
            }
            ctx.observer.state_exited(&ctx.path, &returned);
            ctx.path.pop();

            let target = match table.get(&returned) {
                Some(target) => target.clone(),
                None if returned.is_canceled() => CANCELED.to_owned(),
                None => {
                    return Err(FsmError::StateContractViolation {
                        path: vec![current],
                        outcome: returned.to_string(),
                    })
                }
            };
            if let Some(done) = self.outcomes.get(target.as_str()) {
                break done.clone();
            }
            current = target;
        };

        *self.status.lock() = if outcome.is_canceled() {
            ExecutionStatus::Canceled
        } else {
            ExecutionStatus::Finished(outcome.clone())
        };
        guard.settled = true;
        for sink in &ctx.sinks {
            sink.show(None);
        }
        Ok(outcome)
    }
}

impl std::fmt::Debug for StateMachine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StateMachine")
            .field("name", &self.name)
            .field("outcomes", &self.outcomes)
            .field("states", &self.state_names())
            .field("status", &self.status())
            .finish()
    }
}
