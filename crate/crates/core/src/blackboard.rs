//! Shared keyed store.
//!
//! A [`Blackboard`] is a cheap handle; clones refer to the same store. One
//! store is threaded through an execution and seen by every state at every
//! nesting depth.

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::RwLock;
use thiserror::Error;

use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlackboardError {
    #[error("blackboard keys must not be empty")]
    EmptyKey,
    #[error("key `{0}` not found on the blackboard")]
    KeyNotFound(String),
}

#[derive(Debug, Clone, Default)]
pub struct Blackboard {
    entries: Arc<RwLock<HashMap<String, Value>>>,
}

impl Blackboard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&self, key: impl Into<String>, value: impl Into<Value>) -> Result<(), BlackboardError> {
        let key = key.into();
        if key.is_empty() {
            return Err(BlackboardError::EmptyKey);
        }
        self.entries.write().insert(key, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<Value, BlackboardError> {
        self.entries
            .read()
            .get(key)
            .cloned()
            .ok_or_else(|| BlackboardError::KeyNotFound(key.to_owned()))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.read().contains_key(key)
    }

    pub fn remove(&self, key: &str) -> Option<Value> {
        self.entries.write().remove(key)
    }

    pub fn keys(&self) -> Vec<String> {
        self.entries.read().keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.read().is_empty()
    }

    /// Read-modify-write of one key under a single write lock.
    pub fn update<R>(
        &self,
        key: &str,
        f: impl FnOnce(Option<&Value>) -> (Value, R),
    ) -> Result<R, BlackboardError> {
        if key.is_empty() {
            return Err(BlackboardError::EmptyKey);
        }
        let mut entries = self.entries.write();
        let (value, result) = f(entries.get(key));
        entries.insert(key.to_owned(), value);
        Ok(result)
    }

    /// Copy of all entries at one point in time.
    pub fn snapshot(&self) -> HashMap<String, Value> {
        self.entries.read().clone()
    }
}
