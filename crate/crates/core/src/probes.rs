//! Branch-counting instrumentation.
//!
//! Handlers call [`ProbeContext::probe`] at explicit branch points. While a
//! trace is active every hit is counted; the sum of all counts is the
//! execution-path length, which stands in for CPU cost.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Counters saturate here instead of wrapping.
pub const COUNTER_MAX: u64 = i64::MAX as u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbeError {
    #[error("a trace is already active")]
    NestedTrace,
    #[error("no trace is active")]
    NoActiveTrace,
}

/// Per-branch hit counts for the handling of one event.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTrace {
    pub path_length: u64,
    #[serde(rename = "branches")]
    pub branch_counts: BTreeMap<String, u64>,
}

impl CostTrace {
    /// Builds a trace from explicit counts; `path_length` is derived and
    /// zero counts are dropped, as a branch that never ran is not covered.
    pub fn from_counts<I, S>(counts: I) -> CostTrace
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut branch_counts = BTreeMap::new();
        for (branch, count) in counts.into_iter().filter(|&(_, c)| c > 0) {
            let slot = branch_counts.entry(branch.into()).or_insert(0u64);
            *slot = slot.saturating_add(count).min(COUNTER_MAX);
        }
        let path_length = sum_saturating(branch_counts.values().copied());
        CostTrace {
            path_length,
            branch_counts,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.path_length == 0
    }

    pub fn count(&self, branch: &str) -> u64 {
        self.branch_counts.get(branch).copied().unwrap_or(0)
    }
}

fn sum_saturating(values: impl Iterator<Item = u64>) -> u64 {
    values.fold(0u64, |acc, v| acc.saturating_add(v).min(COUNTER_MAX))
}

/// Highest hit count seen per branch over a campaign.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaxCounts {
    pub entries: BTreeMap<String, u64>,
}

impl MaxCounts {
    pub fn new() -> MaxCounts {
        MaxCounts::default()
    }

    /// Raises every entry to at least the trace's count for that branch.
    /// Returns whether any entry was created or increased.
    pub fn merge(&mut self, trace: &CostTrace) -> bool {
        let mut changed = false;
        for (branch, &count) in &trace.branch_counts {
            match self.entries.get_mut(branch) {
                Some(current) if *current >= count => {}
                Some(current) => {
                    *current = count;
                    changed = true;
                }
                None => {
                    self.entries.insert(branch.clone(), count);
                    changed = true;
                }
            }
        }
        changed
    }

    pub fn get(&self, branch: &str) -> Option<u64> {
        self.entries.get(branch).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Functional form of [`MaxCounts::merge`].
pub fn merge_max(max: &MaxCounts, trace: &CostTrace) -> (MaxCounts, bool) {
    let mut merged = max.clone();
    let changed = merged.merge(trace);
    (merged, changed)
}

/// Trace state for one controller instance.
///
/// A disabled context drops probe hits that arrive with no trace active; a
/// strict context reports them as usage errors.
#[derive(Debug, Default)]
pub struct ProbeContext {
    strict: bool,
    active: Option<HashMap<String, u64>>,
}

impl ProbeContext {
    /// Probes outside a trace are silently dropped.
    pub fn disabled() -> ProbeContext {
        ProbeContext {
            strict: false,
            active: None,
        }
    }

    /// Probes outside a trace are usage errors.
    pub fn strict() -> ProbeContext {
        ProbeContext {
            strict: true,
            active: None,
        }
    }

    pub fn set_strict(&mut self, strict: bool) {
        self.strict = strict;
    }

    pub fn is_tracing(&self) -> bool {
        self.active.is_some()
    }

    pub fn begin_trace(&mut self) -> Result<(), ProbeError> {
        if self.active.is_some() {
            return Err(ProbeError::NestedTrace);
        }
        self.active = Some(HashMap::new());
        Ok(())
    }

    #[inline]
    pub fn probe(&mut self, branch: &str) -> Result<(), ProbeError> {
        self.probe_n(branch, 1)
    }

    /// Records `times` hits of one branch at once. Zero hits still count as
    /// a probe call for strictness but leave no entry.
    #[inline]
    pub fn probe_n(&mut self, branch: &str, times: u64) -> Result<(), ProbeError> {
        match &mut self.active {
            Some(_) if times == 0 => Ok(()),
            Some(counts) => {
                if let Some(slot) = counts.get_mut(branch) {
                    *slot = slot.saturating_add(times).min(COUNTER_MAX);
                } else {
                    counts.insert(branch.to_owned(), times.min(COUNTER_MAX));
                }
                Ok(())
            }
            None if self.strict => Err(ProbeError::NoActiveTrace),
            None => Ok(()),
        }
    }

    pub fn end_trace(&mut self) -> Result<CostTrace, ProbeError> {
        let counts = self.active.take().ok_or(ProbeError::NoActiveTrace)?;
        Ok(CostTrace::from_counts(counts))
    }

    /// Drops any active trace without producing it.
    pub fn abandon(&mut self) {
        self.active = None;
    }
}
