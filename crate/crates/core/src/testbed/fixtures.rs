//! Fixtures shipped with the testbed.

use thiserror::Error;

use crate::event::Event;

use super::openflow::{ingest_message, PacketInMessage};
use super::registry::ServiceRegistry;

/// The seeded testbed: vulnerable services, their collaborators and two
/// constant-cost controls.
pub const TESTBED_JSON: &str = include_str!("../../fixtures/testbed.json");

/// Seven services whose call edges and state access exercise the dependency
/// refinement: `routing` reaches five services but depends on three.
pub const LAYERED_JSON: &str = include_str!("../../fixtures/layered.json");

/// Type descriptors used by type-based generation, keyed by event kind.
pub const EVENT_TYPES_JSON: &str = include_str!("../../fixtures/event-types.json");

/// Ping-like traffic among four hosts on two switches.
pub const NORMAL_TRAFFIC_JSONL: &str = include_str!("../../fixtures/normal-traffic.jsonl");

pub fn testbed_registry() -> ServiceRegistry {
    ServiceRegistry::from_json(TESTBED_JSON).expect("shipped testbed fixture is valid")
}

pub fn layered_registry() -> ServiceRegistry {
    ServiceRegistry::from_json(LAYERED_JSON).expect("shipped layered fixture is valid")
}

pub fn normal_traffic() -> Vec<Event> {
    parse_workload(NORMAL_TRAFFIC_JSONL).expect("shipped workload is valid")
}

#[derive(Debug, Error)]
#[error("workload line {line}: {message}")]
pub struct WorkloadError {
    pub line: usize,
    pub message: String,
}

/// Parses a workload: one JSON object per line, either a serialized
/// [`Event`] or an OpenFlow-lite message (recognized by its `"type"` field).
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_workload(text: &str) -> Result<Vec<Event>, WorkloadError> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fail = |message: String| WorkloadError {
            line: i + 1,
            message,
        };
        let value: serde_json::Value =
            serde_json::from_str(trimmed).map_err(|e| fail(e.to_string()))?;
        let event = if value.get("type").is_some() {
            ingest_message(trimmed).map_err(|e| fail(e.to_string()))?
        } else {
            let event: Event = serde_json::from_value(value).map_err(|e| fail(e.to_string()))?;
            if !event.is_well_typed() {
                return Err(fail("kind, subtype and payload disagree".to_owned()));
            }
            event
        };
        events.push(event);
    }
    Ok(events)
}

/// Renders events as a workload; packet-ins use the OpenFlow-lite form.
pub fn render_workload(events: &[Event]) -> String {
    let mut out = String::new();
    for event in events {
        let line = match PacketInMessage::from_event(event) {
            Some(msg) => serde_json::to_string(&msg),
            None => serde_json::to_string(event),
        }
        .expect("events serialize");
        out.push_str(&line);
        out.push('\n');
    }
    out
}
