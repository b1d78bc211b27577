use std::sync::Arc;

use hsm_core::StateMachine;
use indexmap::IndexMap;
use parking_lot::RwLock;

use crate::error::MonitorError;
use crate::snapshot::{snapshot, MonitorSnapshot};

struct Entry {
    machine: Arc<StateMachine>,
    seq: u64,
}

/// Machines published by a monitor server, keyed by id. Cloning shares
/// the same registry.
#[derive(Clone, Default)]
pub struct Registry {
    entries: Arc<RwLock<IndexMap<String, Entry>>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&self, fsm_id: impl Into<String>, machine: Arc<StateMachine>) -> Result<(), MonitorError> {
        let fsm_id = fsm_id.into();
        if fsm_id.trim().is_empty() {
            return Err(MonitorError::EmptyId);
        }
        let mut entries = self.entries.write();
        if entries.contains_key(&fsm_id) {
            return Err(MonitorError::DuplicateId(fsm_id));
        }
        entries.insert(fsm_id, Entry { machine, seq: 0 });
        Ok(())
    }

    /// Registers `root` under its name and every nested machine under its
    /// own name.
    pub fn register_tree(&self, root: &Arc<StateMachine>) -> Result<(), MonitorError> {
        self.register(root.name(), Arc::clone(root))?;
        for child in root.nested_machines() {
            self.register(child.name().to_owned(), child)?;
        }
        Ok(())
    }

    /// Registered ids in registration order.
    pub fn ids(&self) -> Vec<String> {
        self.entries.read().keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.read().is_empty()
    }

    /// Takes one snapshot of every machine, advancing each id's sequence
    /// number. Registration waits for a cycle in progress.
    pub fn publish_cycle(&self) -> Vec<MonitorSnapshot> {
        let mut entries = self.entries.write();
        entries
            .iter_mut()
            .map(|(id, entry)| {
                entry.seq += 1;
                snapshot(&entry.machine, id, entry.seq)
            })
            .collect()
    }
}
