use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::event::Event;
use crate::probes::{CostTrace, ProbeContext, ProbeError};

use super::registry::{RegistryError, ServiceDescriptor, ServiceRegistry};
use super::store::{Collection, StateStore, StoreError};

/// Derived events may cascade this many generations past the original event.
pub const CASCADE_DEPTH_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DispatchError {
    #[error("derived events still pending after {CASCADE_DEPTH_CAP} generations")]
    CascadeOverflow,
    #[error("probe misuse in service {service:?}: {source}")]
    Probe { service: String, source: ProbeError },
    #[error(transparent)]
    Trace(#[from] ProbeError),
}

/// Why a handler gave up on an event.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", content = "message", rename_all = "snake_case")]
pub enum HandlerError {
    /// The event made no sense for the service (unknown host, bad payload...).
    #[error("{0}")]
    Domain(String),
    /// The service touched state outside its declared read/write sets.
    #[error("{0}")]
    Store(
        #[from]
        #[serde(serialize_with = "serialize_display")]
        StoreError,
    ),
}

fn serialize_display<S: serde::Serializer>(e: &StoreError, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(e)
}

impl HandlerError {
    pub fn domain(message: impl Into<String>) -> HandlerError {
        HandlerError::Domain(message.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HandlerFailure {
    pub service: String,
    /// Cascade generation of the event being handled; 0 is the dispatched event.
    pub generation: usize,
    pub error: HandlerError,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DispatchResult {
    /// Services whose handler ran on the dispatched event itself.
    pub handled_by: Vec<String>,
    pub derived_events: Vec<Event>,
    pub errors: Vec<HandlerFailure>,
}

impl DispatchResult {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Probe access for a running handler. A misuse is remembered and surfaces
/// as a dispatch error once the handler returns.
pub struct Probes<'a> {
    ctx: &'a mut ProbeContext,
    fault: &'a mut Option<ProbeError>,
}

impl Probes<'_> {
    #[inline]
    pub fn hit(&mut self, branch: &str) {
        if let Err(e) = self.ctx.probe(branch) {
            self.fault.get_or_insert(e);
        }
    }

    /// Same as calling `hit` `times` times.
    #[inline]
    pub fn hit_n(&mut self, branch: &str, times: u64) {
        if let Err(e) = self.ctx.probe_n(branch, times) {
            self.fault.get_or_insert(e);
        }
    }
}

/// State access for a running handler, checked against its declarations.
pub struct State<'a> {
    service: &'a ServiceDescriptor,
    store: &'a mut StateStore,
}

impl State<'_> {
    pub fn read(&self, object: &str) -> Result<Option<&Collection>, StoreError> {
        self.store.read(self.service, object)
    }

    pub fn write(&mut self, object: &str) -> Result<&mut Collection, StoreError> {
        self.store.write(self.service, object)
    }
}

pub struct HandlerCx<'a> {
    pub service: &'a ServiceDescriptor,
    pub probes: Probes<'a>,
    pub state: State<'a>,
    posted: &'a mut Vec<Event>,
}

impl HandlerCx<'_> {
    /// Queues a derived event for the next cascade generation.
    pub fn post(&mut self, event: Event) {
        self.posted.push(event);
    }
}

/// A running controller: a set of enabled services over one state store.
pub struct Controller {
    registry: Arc<ServiceRegistry>,
    /// Registry positions of enabled services, in registration order.
    enabled: Vec<usize>,
    store: StateStore,
    probes: ProbeContext,
}

impl Controller {
    /// Enables every registered service.
    pub fn new(registry: impl Into<Arc<ServiceRegistry>>) -> Controller {
        let registry = registry.into();
        let enabled = (0..registry.len()).collect();
        Controller {
            registry,
            enabled,
            store: StateStore::new(),
            probes: ProbeContext::disabled(),
        }
    }

    /// Enables only the named services.
    pub fn with_services(
        registry: impl Into<Arc<ServiceRegistry>>,
        services: &BTreeSet<String>,
    ) -> Result<Controller, RegistryError> {
        let registry = registry.into();
        for id in services {
            registry.require(id)?;
        }
        let enabled = registry
            .services()
            .iter()
            .enumerate()
            .filter(|(_, s)| services.contains(&s.id))
            .map(|(i, _)| i)
            .collect();
        Ok(Controller {
            registry,
            enabled,
            store: StateStore::new(),
            probes: ProbeContext::disabled(),
        })
    }

    pub fn registry(&self) -> &ServiceRegistry {
        &self.registry
    }

    pub fn enabled_services(&self) -> impl Iterator<Item = &ServiceDescriptor> {
        self.enabled.iter().map(|&i| &self.registry.services()[i])
    }

    pub fn store(&self) -> &StateStore {
        &self.store
    }

    pub fn probes_mut(&mut self) -> &mut ProbeContext {
        &mut self.probes
    }

    /// Empties every state object.
    pub fn reset_state(&mut self) {
        self.store.clear();
        self.probes.abandon();
    }

    /// Delivers `event` to every subscribed service in registration order,
    /// then delivers derived events breadth-first.
    ///
    /// Handler failures are recorded in the result; only probe misuse and
    /// runaway cascades abort the dispatch.
    pub fn dispatch(&mut self, event: &Event) -> Result<DispatchResult, DispatchError> {
        let mut result = DispatchResult::default();
        let mut posted = Vec::new();
        self.deliver(event, 0, &mut posted, &mut result)?;
        let mut generation = 0;
        while !posted.is_empty() {
            if generation == CASCADE_DEPTH_CAP {
                return Err(DispatchError::CascadeOverflow);
            }
            generation += 1;
            let frontier = std::mem::take(&mut posted);
            for derived in &frontier {
                self.deliver(derived, generation, &mut posted, &mut result)?;
            }
            result.derived_events.extend(frontier);
        }
        Ok(result)
    }

    /// Dispatches `event` inside a fresh trace and returns its cost.
    pub fn dispatch_traced(
        &mut self,
        event: &Event,
    ) -> Result<(DispatchResult, CostTrace), DispatchError> {
        self.probes.begin_trace()?;
        match self.dispatch(event) {
            Ok(result) => Ok((result, self.probes.end_trace()?)),
            Err(e) => {
                self.probes.abandon();
                Err(e)
            }
        }
    }

    fn deliver(
        &mut self,
        event: &Event,
        generation: usize,
        posted: &mut Vec<Event>,
        result: &mut DispatchResult,
    ) -> Result<(), DispatchError> {
        let registry = Arc::clone(&self.registry);
        for &i in &self.enabled {
            let service = &registry.services()[i];
            if !service.handles.iter().any(|f| f.matches(event)) {
                continue;
            }
            if generation == 0 {
                result.handled_by.push(service.id.clone());
            }
            let mut fault = None;
            let outcome = {
                let mut cx = HandlerCx {
                    service,
                    probes: Probes {
                        ctx: &mut self.probes,
                        fault: &mut fault,
                    },
                    state: State {
                        service,
                        store: &mut self.store,
                    },
                    posted,
                };
                service.behavior.handle(event, &mut cx)
            };
            if let Some(source) = fault {
                return Err(DispatchError::Probe {
                    service: service.id.clone(),
                    source,
                });
            }
            if let Err(error) = outcome {
                result.errors.push(HandlerFailure {
                    service: service.id.clone(),
                    generation,
                    error,
                });
            }
        }
        Ok(())
    }
}
