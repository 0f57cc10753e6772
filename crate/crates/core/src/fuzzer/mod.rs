//! The fuzzing loop: mutate choice streams, decode them into event
//! sequences, execute against the target's dependency set, keep inputs
//! that raise some branch's maximum count, and flag inputs whose final
//! event costs more than the threshold.

mod campaign;
mod mutate;
mod report;

pub use campaign::{
    execute, execute_on, run_campaign, run_campaign_observed, CampaignConfig, CampaignError,
    ExecError, ExecRecord, Harness, QueueEntry, DEFAULT_FLAG_LIMIT,
};
pub use mutate::{mutate, MAX_BLOCK};
pub use report::{
    replay, triage, Flag, FuzzReport, MaxCountsStep, ReplayError, ReplayOutcome, Triage,
};
