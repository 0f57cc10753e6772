use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibrate::ComplexityVerdict;
use crate::depgraph::{DependencySet, EventTypeSet};
use crate::event::Event;
use crate::generators::{validate_sequence, ChoiceStream, Violation};
use crate::probes::{CostTrace, MaxCounts};
use crate::testbed::ServiceRegistry;

use super::campaign::{CampaignConfig, CampaignError, Harness};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Triage {
    TruePositiveCandidate,
    FalsePositive { violations: Vec<Violation> },
}

impl Triage {
    pub fn from_violations(violations: Vec<Violation>) -> Triage {
        if violations.is_empty() {
            Triage::TruePositiveCandidate
        } else {
            Triage::FalsePositive { violations }
        }
    }

    pub fn is_candidate(&self) -> bool {
        matches!(self, Triage::TruePositiveCandidate)
    }
}

/// Re-validates a flag's decoded sequence.
pub fn triage(flag: &Flag) -> Triage {
    Triage::from_violations(validate_sequence(&flag.events))
}

/// An input whose final event cost more than the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub execution: u64,
    pub stream_hex: String,
    pub path_length: u64,
    pub t_max: u64,
    pub triage: Triage,
    pub trace: CostTrace,
    pub events: Vec<Event>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complexity: Option<ComplexityVerdict>,
}

/// maxCounts after an input joined the queue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxCountsStep {
    pub execution: u64,
    pub queue_size: usize,
    pub branches: usize,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub config: CampaignConfig,
    pub dependency: DependencySet,
    pub event_types: EventTypeSet,
    pub executions: u64,
    pub execution_errors: u64,
    pub queue_size: usize,
    /// Every flagged execution, including those past the stored-flag limit.
    pub flags_total: u64,
    pub flags: Vec<Flag>,
    pub max_counts: MaxCounts,
    pub max_counts_history: Vec<MaxCountsStep>,
    pub seed: u64,
    /// The services the campaign ran against, so the report replays on its own.
    pub registry: ServiceRegistry,
}

impl FuzzReport {
    pub fn candidates(&self) -> impl Iterator<Item = (usize, &Flag)> {
        self.flags
            .iter()
            .enumerate()
            .filter(|(_, f)| f.triage.is_candidate())
    }

    pub fn has_candidate(&self) -> bool {
        self.candidates().next().is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> Result<FuzzReport, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// A harness matching the campaign that produced this report.
    pub fn harness(&self) -> Result<Harness, CampaignError> {
        Harness::new(
            Arc::new(self.registry.clone()),
            &self.config.target,
            self.config.seq_len,
            self.config.mode,
        )
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("report has {count} stored flags; no flag {index}")]
    NoSuchFlag { index: usize, count: usize },
    #[error("flag stream does not decode: {0}")]
    Stream(String),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
    #[error("replay diverged: {0}")]
    Divergence(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayOutcome {
    pub flag: usize,
    pub trace: CostTrace,
    pub violations: Vec<Violation>,
    pub triage: Triage,
}

/// Re-decodes and re-executes a stored flag, failing if anything differs
/// from what the campaign recorded.
pub fn replay(report: &FuzzReport, index: usize) -> Result<ReplayOutcome, ReplayError> {
    let flag = report.flags.get(index).ok_or(ReplayError::NoSuchFlag {
        index,
        count: report.flags.len(),
    })?;
    let stream =
        ChoiceStream::from_hex(&flag.stream_hex).map_err(|e| ReplayError::Stream(e.to_string()))?;
    let mut harness = report.harness()?;
    let (events, trace) = harness
        .run_bytes(stream.into_bytes())
        .map_err(ReplayError::Divergence)?;
    if events != flag.events {
        let at = events
            .iter()
            .zip(&flag.events)
            .position(|(a, b)| a != b)
            .unwrap_or(events.len().min(flag.events.len()));
        return Err(ReplayError::Divergence(format!(
            "decoded sequence differs from the recorded one at event {at}"
        )));
    }
    if trace.path_length != flag.path_length {
        return Err(ReplayError::Divergence(format!(
            "path length {} but the report recorded {}",
            trace.path_length, flag.path_length
        )));
    }
    let violations = validate_sequence(&events);
    Ok(ReplayOutcome {
        flag: index,
        trace,
        triage: Triage::from_violations(violations.clone()),
        violations,
    })
}
