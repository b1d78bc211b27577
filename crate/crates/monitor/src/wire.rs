//! Version 1 of the snapshot wire format: one JSON object per text frame,
//! keys sorted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::snapshot::{MonitorSnapshot, Status, StructureDescriptor};

pub const VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot decode snapshot at {path}: {reason}")]
pub struct DecodeError {
    pub path: String,
    pub reason: String,
}

// Field order is lexicographic; see StructureDescriptor.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Message {
    current_path: Vec<String>,
    final_outcome: Option<String>,
    fsm_id: String,
    seq: u64,
    status: Status,
    structure: StructureDescriptor,
    timestamp_ms: u64,
    version: u64,
}

pub fn encode(s: &MonitorSnapshot) -> String {
    let message = Message {
        current_path: s.current_path.clone(),
        final_outcome: s.final_outcome.clone(),
        fsm_id: s.fsm_id.clone(),
        seq: s.seq,
        status: s.status,
        structure: s.structure.clone(),
        timestamp_ms: s.timestamp_ms,
        version: VERSION,
    };
    serde_json::to_string(&message).expect("snapshots always serialize")
}

pub fn decode(text: &str) -> Result<MonitorSnapshot, DecodeError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| DecodeError {
        path: ".".into(),
        reason: e.to_string(),
    })?;
    match value.get("version") {
        Some(v) if v.as_u64() == Some(VERSION) => {}
        Some(v) => {
            return Err(DecodeError {
                path: "version".into(),
                reason: format!("unsupported version {v}"),
            })
        }
        None => {
            return Err(DecodeError {
                path: "version".into(),
                reason: "missing".into(),
            })
        }
    }
    let m: Message = serde_path_to_error::deserialize(value).map_err(|e| DecodeError {
        path: e.path().to_string(),
        reason: e.into_inner().to_string(),
    })?;
    Ok(MonitorSnapshot {
        fsm_id: m.fsm_id,
        seq: m.seq,
        timestamp_ms: m.timestamp_ms,
        structure: m.structure,
        status: m.status,
        current_path: m.current_path,
        final_outcome: m.final_outcome,
    })
}
