use std::collections::BTreeMap;
use std::fmt;
use std::time::{SystemTime, UNIX_EPOCH};

use hsm_core::{ExecutionStatus, MachineLayout, StateMachine};
use serde::{Deserialize, Serialize};

/// Static shape of a machine as sent to viewers.
///
/// Fields are declared in lexicographic order so the encoded form has
/// sorted keys no matter how serde_json is configured.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureDescriptor {
    pub initial: String,
    pub name: String,
    pub outcomes: Vec<String>,
    pub states: Vec<StateDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDescriptor {
    pub child: Option<Box<StructureDescriptor>>,
    pub name: String,
    pub outcomes: Vec<String>,
    pub transitions: BTreeMap<String, String>,
}

impl StructureDescriptor {
    pub fn from_layout(layout: &MachineLayout) -> Self {
        Self {
            initial: layout.initial.clone().unwrap_or_default(),
            name: layout.name.clone(),
            outcomes: layout.outcomes.clone(),
            states: layout
                .states
                .iter()
                .map(|s| StateDescriptor {
                    child: s.child.as_deref().map(|c| Box::new(Self::from_layout(c))),
                    name: s.name.clone(),
                    outcomes: s.outcomes.clone(),
                    transitions: s.transitions.clone(),
                })
                .collect(),
        }
    }

    pub fn state(&self, name: &str) -> Option<&StateDescriptor> {
        self.states.iter().find(|s| s.name == name)
    }

    /// Follows `path` downwards through nested machines. Returns false if a
    /// name is missing at its depth or the path continues past a plain state.
    pub fn resolves(&self, path: &[String]) -> bool {
        let mut level = self;
        for (i, name) in path.iter().enumerate() {
            let Some(state) = level.state(name) else {
                return false;
            };
            match &state.child {
                Some(child) => level = child,
                None => return i + 1 == path.len(),
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Idle,
    Running,
    Finished,
    Canceled,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Idle => "idle",
            Status::Running => "running",
            Status::Finished => "finished",
            Status::Canceled => "canceled",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonitorSnapshot {
    pub fsm_id: String,
    pub seq: u64,
    pub timestamp_ms: u64,
    pub structure: StructureDescriptor,
    pub status: Status,
    pub current_path: Vec<String>,
    pub final_outcome: Option<String>,
}

impl MonitorSnapshot {
    /// Every broken invariant, as human-readable strings. Empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.fsm_id.is_empty() {
            out.push("fsm_id is empty".to_owned());
        }
        let running = self.status == Status::Running;
        if running == self.current_path.is_empty() {
            out.push(format!(
                "status {} with {} path entries",
                self.status,
                self.current_path.len()
            ));
        }
        if (self.status == Status::Finished) != self.final_outcome.is_some() {
            out.push(format!("status {} with final_outcome {:?}", self.status, self.final_outcome));
        }
        if let Some(outcome) = &self.final_outcome {
            if !self.structure.outcomes.contains(outcome) {
                out.push(format!("final_outcome `{outcome}` is not a machine outcome"));
            }
        }
        if !self.structure.resolves(&self.current_path) {
            out.push(format!("path {:?} does not resolve in the structure", self.current_path));
        }
        out
    }
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Captures status, path and structure of `machine` at one point in time.
pub fn snapshot(machine: &StateMachine, fsm_id: &str, seq: u64) -> MonitorSnapshot {
    let (status, layout) = machine.observe();
    let (status, current_path, final_outcome) = match status {
        ExecutionStatus::Idle => (Status::Idle, Vec::new(), None),
        ExecutionStatus::Running(path) => (Status::Running, path, None),
        ExecutionStatus::Finished(outcome) => (Status::Finished, Vec::new(), Some(outcome.to_string())),
        ExecutionStatus::Canceled => (Status::Canceled, Vec::new(), None),
    };
    MonitorSnapshot {
        fsm_id: fsm_id.to_owned(),
        seq,
        timestamp_ms: now_ms(),
        structure: StructureDescriptor::from_layout(&layout),
        status,
        current_path,
        final_outcome,
    }
}
