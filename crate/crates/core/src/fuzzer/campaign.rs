use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depgraph::{dependency_set, event_types_for, DependencySet, EventTypeSet};
use crate::event::Event;
use crate::generators::{
    validate_sequence, ChoiceStream, GenerateError, GeneratorMode, GeneratorState,
    SequenceGenerator,
};
use crate::probes::{CostTrace, MaxCounts};
use crate::testbed::{Controller, DispatchError, RegistryError, ServiceRegistry};

use super::mutate::mutate;
use super::report::{Flag, FuzzReport, MaxCountsStep, Triage};

/// Flags kept in full per campaign; later ones are only counted.
pub const DEFAULT_FLAG_LIMIT: usize = 16;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid campaign configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("target {0:?} not analyzable: its dependency set handles no events")]
    NotAnalyzable(String),
    #[error(transparent)]
    Generate(#[from] GenerateError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("cannot execute an empty sequence")]
    Empty,
    #[error("event {index}: {source}")]
    Dispatch { index: usize, source: DispatchError },
}

impl ExecError {
    /// Position of the failing event; 0 for an empty sequence.
    pub fn index(&self) -> usize {
        match self {
            ExecError::Dispatch { index, .. } => *index,
            ExecError::Empty => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub target: String,
    pub seq_len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_execs: Option<u64>,
    pub t_max: u64,
    pub seed: u64,
    #[serde(default)]
    pub mode: GeneratorMode,
    #[serde(default = "default_flag_limit")]
    pub flag_limit: usize,
}

fn default_flag_limit() -> usize {
    DEFAULT_FLAG_LIMIT
}

impl CampaignConfig {
    pub fn new(target: impl Into<String>, seq_len: usize, t_max: u64, seed: u64) -> CampaignConfig {
        CampaignConfig {
            target: target.into(),
            seq_len,
            budget_secs: None,
            budget_execs: None,
            t_max,
            seed,
            mode: GeneratorMode::Full,
            flag_limit: DEFAULT_FLAG_LIMIT,
        }
    }

    pub fn with_execs(mut self, execs: u64) -> Self {
        self.budget_execs = Some(execs);
        self
    }

    pub fn with_secs(mut self, secs: f64) -> Self {
        self.budget_secs = Some(secs);
        self
    }

    pub fn with_mode(mut self, mode: GeneratorMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: &str| Err(CampaignError::Config(m.to_owned()));
        if self.seq_len == 0 {
            return bad("sequence length must be at least 1");
        }
        if self.budget_secs.is_none() && self.budget_execs.is_none() {
            return bad("set a time budget, an execution budget, or both");
        }
        if self
            .budget_secs
            .is_some_and(|s| !(s.is_finite() && s > 0.0))
        {
            return bad("time budget must be a positive number of seconds");
        }
        if self.t_max == 0 {
            return bad("threshold must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueEntry {
    /// The consumed prefix of the stream that produced this input.
    pub stream: Vec<u8>,
    pub parent: Option<usize>,
    pub discovered_at: u64,
    pub path_length: u64,
}

/// What happened to one executed input, as seen by an observer.
#[derive(Debug)]
pub struct ExecRecord<'a> {
    pub index: u64,
    pub parent: Option<usize>,
    pub events: &'a [Event],
    pub trace: Option<&'a CostTrace>,
    pub flagged: bool,
    /// The trace raised some maxCounts entry.
    pub merge_changed: bool,
    pub enqueued: bool,
}

/// Runs a sequence against a controller: reset, untraced priming, traced
/// final event.
pub fn execute_on(controller: &mut Controller, events: &[Event]) -> Result<CostTrace, ExecError> {
    let (last, priming) = events.split_last().ok_or(ExecError::Empty)?;
    controller.reset_state();
    for (index, event) in priming.iter().enumerate() {
        controller
            .dispatch(event)
            .map_err(|source| ExecError::Dispatch { index, source })?;
    }
    controller
        .dispatch_traced(last)
        .map(|(_, trace)| trace)
        .map_err(|source| ExecError::Dispatch {
            index: priming.len(),
            source,
        })
}

/// Runs a sequence with only the dependency set's services enabled.
pub fn execute(
    registry: &ServiceRegistry,
    dep: &DependencySet,
    events: &[Event],
) -> Result<CostTrace, ExecError> {
    let mut controller = Controller::with_services(registry.clone(), &dep.members)
        .expect("dependency members are registered");
    execute_on(&mut controller, events)
}

/// Everything fixed for a campaign: what is fuzzed and how sequences decode.
pub struct Harness {
    registry: Arc<ServiceRegistry>,
    dep: DependencySet,
    generator: SequenceGenerator,
    controller: Controller,
    seq_len: usize,
}

impl Harness {
    pub fn new(
        registry: Arc<ServiceRegistry>,
        target: &str,
        seq_len: usize,
        mode: GeneratorMode,
    ) -> Result<Harness, CampaignError> {
        let dep = dependency_set(&registry, target)?;
        let types = event_types_for(&registry, &dep);
        if types.is_empty() {
            return Err(CampaignError::NotAnalyzable(target.to_owned()));
        }
        let generator = SequenceGenerator::new(types, mode)?;
        let controller = Controller::with_services(Arc::clone(&registry), &dep.members)?;
        Ok(Harness {
            registry,
            dep,
            generator,
            controller,
            seq_len,
        })
    }

    pub fn dependency(&self) -> &DependencySet {
        &self.dep
    }

    pub fn event_types(&self) -> &EventTypeSet {
        self.generator.event_types()
    }

    pub fn registry(&self) -> &ServiceRegistry {
        &self.registry
    }

    /// Decodes a full sequence from a fresh generator state.
    pub fn decode(&self, stream: &mut ChoiceStream) -> Result<Vec<Event>, GenerateError> {
        self.generator
            .generate(self.seq_len, stream, &mut GeneratorState::new())
    }

    pub fn execute(&mut self, events: &[Event]) -> Result<CostTrace, ExecError> {
        execute_on(&mut self.controller, events)
    }

    /// Decodes and executes stored stream bytes, as a replay would.
    pub fn run_bytes(&mut self, bytes: Vec<u8>) -> Result<(Vec<Event>, CostTrace), String> {
        let mut stream = ChoiceStream::new(bytes);
        let events = self.decode(&mut stream).map_err(|e| e.to_string())?;
        let trace = self.execute(&events).map_err(|e| e.to_string())?;
        Ok((events, trace))
    }
}

/// Runs a campaign to its budget.
pub fn run_campaign(
    registry: &ServiceRegistry,
    config: &CampaignConfig,
) -> Result<FuzzReport, CampaignError> {
    run_campaign_observed(registry, config, |_| {})
}

/// Runs a campaign, reporting every execution to `observe`.
pub fn run_campaign_observed(
    registry: &ServiceRegistry,
    config: &CampaignConfig,
    mut observe: impl FnMut(&ExecRecord<'_>),
) -> Result<FuzzReport, CampaignError> {
    config.validate()?;
    let registry = Arc::new(registry.clone());
    let mut harness = Harness::new(
        Arc::clone(&registry),
        &config.target,
        config.seq_len,
        config.mode,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let deadline = config
        .budget_secs
        .map(|s| Instant::now() + Duration::from_secs_f64(s));
    let exhausted = |executions: u64| {
        config.budget_execs.is_some_and(|b| executions >= b)
            || deadline.is_some_and(|d| Instant::now() >= d)
    };

    let mut queue: Vec<QueueEntry> = Vec::new();
    let mut max_counts = MaxCounts::new();
    let mut history = Vec::new();
    let mut flags = Vec::new();
    let mut flags_total = 0u64;
    let mut executions = 0u64;
    let mut execution_errors = 0u64;

    while !exhausted(executions) {
        let seeding = queue.is_empty();
        let (parent, genotype) = if seeding {
            (None, Vec::new())
        } else {
            let i = rng.gen_range(0..queue.len());
            (Some(i), mutate(&queue[i].stream, &mut rng))
        };
        let mut stream = ChoiceStream::with_filler(genotype, rng.gen());
        let events = harness.decode(&mut stream)?;
        let index = executions;
        executions += 1;
        let consumed = stream.bytes()[..stream.cursor()].to_vec();

        let trace = match harness.execute(&events) {
            Ok(trace) => trace,
            Err(_) => {
                execution_errors += 1;
                observe(&ExecRecord {
                    index,
                    parent,
                    events: &events,
                    trace: None,
                    flagged: false,
                    merge_changed: false,
                    enqueued: false,
                });
                continue;
            }
        };

        let flagged = trace.path_length > config.t_max;
        if flagged {
            flags_total += 1;
            if flags.len() < config.flag_limit {
                let violations = validate_sequence(&events);
                flags.push(Flag {
                    execution: index,
                    stream_hex: hex::encode(&consumed),
                    path_length: trace.path_length,
                    t_max: config.t_max,
                    triage: Triage::from_violations(violations),
                    trace: trace.clone(),
                    events: events.clone(),
                    complexity: None,
                });
            }
        }
        // The first input always seeds the queue and maxCounts.
        let merge_changed = (!flagged || seeding) && max_counts.merge(&trace);
        let enqueued = merge_changed || seeding;
        if enqueued {
            queue.push(QueueEntry {
                stream: consumed,
                parent,
                discovered_at: index,
                path_length: trace.path_length,
            });
            history.push(MaxCountsStep {
                execution: index,
                queue_size: queue.len(),
                branches: max_counts.len(),
                total: max_counts
                    .entries
                    .values()
                    .fold(0u64, |a, &v| a.saturating_add(v)),
            });
        }
        observe(&ExecRecord {
            index,
            parent,
            events: &events,
            trace: Some(&trace),
            flagged,
            merge_changed,
            enqueued,
        });
    }

    Ok(FuzzReport {
        config: config.clone(),
        dependency: harness.dependency().clone(),
        event_types: harness.event_types().clone(),
        executions,
        execution_errors,
        queue_size: queue.len(),
        flags_total,
        flags,
        max_counts,
        max_counts_history: history,
        seed: config.seed,
        registry: (*registry).clone(),
    })
}
