//! Decoding choice streams into event sequences.

mod choice;
mod constrained;
mod typed;
mod validate;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::depgraph::EventTypeSet;
use crate::event::{Event, EventKind};

pub use choice::{bytes_for_bound, ChoiceStream, StreamHexError};
pub use constrained::{
    constrained_generate, GeneratorState, CONFIG_VOCABULARY, DEVICE_POOL, LLDP_MULTICAST, MAX_PORTS,
};
pub use typed::{
    conforms, type_based_generate, value_to_event, TypeCatalog, TypeDescriptor, Value, MAX_DEPTH,
};
pub use validate::{validate_event, validate_sequence, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("type descriptor nesting exceeds {0} levels")]
    DepthExceeded(usize),
    #[error("bad type descriptor: {0}")]
    Descriptor(String),
    #[error("no type descriptor for {0}")]
    NoDescriptor(EventKind),
    #[error("no event types to generate from")]
    NoEventTypes,
}

/// Which kinds get constraint-aware generation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorMode {
    /// Every kind is generated with its constraints.
    #[default]
    Full,
    /// Every kind comes from its type descriptor alone.
    GenericOnly,
}

impl GeneratorMode {
    pub fn constrained_kinds(self) -> BTreeSet<EventKind> {
        match self {
            GeneratorMode::Full => EventKind::ALL.into_iter().collect(),
            GeneratorMode::GenericOnly => BTreeSet::new(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorMode::Full => "full",
            GeneratorMode::GenericOnly => "generic-only",
        }
    }
}

impl fmt::Display for GeneratorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeneratorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(GeneratorMode::Full),
            "generic-only" => Ok(GeneratorMode::GenericOnly),
            other => Err(format!(
                "unknown mode {other:?} (expected full or generic-only)"
            )),
        }
    }
}

/// Turns a choice stream into `n` events drawn from an event-type set.
#[derive(Debug, Clone)]
pub struct SequenceGenerator {
    types: EventTypeSet,
    constrained: BTreeSet<EventKind>,
    catalog: Arc<TypeCatalog>,
}

impl SequenceGenerator {
    pub fn new(
        types: EventTypeSet,
        mode: GeneratorMode,
    ) -> Result<SequenceGenerator, GenerateError> {
        SequenceGenerator::with_kinds(
            types,
            mode.constrained_kinds(),
            Arc::new(TypeCatalog::shipped()),
        )
    }

    pub fn with_kinds(
        types: EventTypeSet,
        constrained: BTreeSet<EventKind>,
        catalog: Arc<TypeCatalog>,
    ) -> Result<SequenceGenerator, GenerateError> {
        if types.is_empty() {
            return Err(GenerateError::NoEventTypes);
        }
        for f in types.types() {
            if !constrained.contains(&f.kind) && catalog.descriptor(f.kind).is_none() {
                return Err(GenerateError::NoDescriptor(f.kind));
            }
        }
        Ok(SequenceGenerator {
            types,
            constrained,
            catalog,
        })
    }

    pub fn event_types(&self) -> &EventTypeSet {
        &self.types
    }

    /// Decodes `n` events. The type of each position is one uniform choice
    /// over the event-type set; the rest of the position's choices belong
    /// to the chosen generator.
    pub fn generate(
        &self,
        n: usize,
        stream: &mut ChoiceStream,
        state: &mut GeneratorState,
    ) -> Result<Vec<Event>, GenerateError> {
        let types = self.types.types();
        let mut events = Vec::with_capacity(n);
        for _ in 0..n {
            let filter = types[stream.next_index(types.len())];
            let event = if self.constrained.contains(&filter.kind) {
                constrained_generate(filter.kind, filter.subtype, stream, state)
            } else {
                let mut event = self.catalog.generate_event(filter.kind, stream)?;
                if let Some(subtype) = filter.subtype {
                    event.subtype = subtype;
                }
                event
            };
            events.push(event);
        }
        Ok(events)
    }
}

/// One-shot form of [`SequenceGenerator::generate`] in full mode.
pub fn generate_sequence(
    types: &EventTypeSet,
    n: usize,
    stream: &mut ChoiceStream,
    state: &mut GeneratorState,
) -> Result<Vec<Event>, GenerateError> {
    SequenceGenerator::new(types.clone(), GeneratorMode::Full)?.generate(n, stream, state)
}
