//! Service dependency analysis.
//!
//! The reach set of a target is everything connected to it through call
//! edges in either direction. The dependency set refines it: a service is
//! kept only if it writes state that the target (or an already kept
//! service) reads.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::event::{Event, EventFilter};
use crate::testbed::{RegistryError, ServiceRegistry};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencySet {
    pub target: String,
    pub members: BTreeSet<String>,
    /// Every state object read by some member.
    pub read_closure: BTreeSet<String>,
    /// Passes over the reach set until nothing changed, including the last one.
    pub rounds: usize,
}

impl DependencySet {
    pub fn contains(&self, service: &str) -> bool {
        self.members.contains(service)
    }
}

/// Event types handled by a set of services, in a fixed order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventTypeSet {
    types: Vec<EventFilter>,
}

impl EventTypeSet {
    /// Sorted and deduplicated. A subtype filter is dropped when the set
    /// also holds its whole kind, so generation does not favor that subtype.
    pub fn new(types: impl IntoIterator<Item = EventFilter>) -> EventTypeSet {
        let set: BTreeSet<EventFilter> = types.into_iter().collect();
        let whole =
            |f: &EventFilter| f.subtype.is_some() && set.contains(&EventFilter::kind(f.kind));
        EventTypeSet {
            types: set.iter().filter(|f| !whole(f)).copied().collect(),
        }
    }

    pub fn types(&self) -> &[EventFilter] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn contains(&self, filter: &EventFilter) -> bool {
        self.types.contains(filter)
    }

    /// Some entry accepts the event.
    pub fn covers(&self, event: &Event) -> bool {
        self.types.iter().any(|f| f.matches(event))
    }
}

/// Services connected to `target` through call edges, ignoring direction.
pub fn reach_set(
    registry: &ServiceRegistry,
    target: &str,
) -> Result<BTreeSet<String>, RegistryError> {
    registry.require(target)?;
    let mut seen = BTreeSet::from([target.to_owned()]);
    let mut queue = VecDeque::from([target.to_owned()]);
    while let Some(current) = queue.pop_front() {
        for s in registry.services() {
            let linked = if s.id == current {
                s.calls.iter().cloned().collect::<Vec<_>>()
            } else if s.calls.contains(&current) {
                vec![s.id.clone()]
            } else {
                continue;
            };
            for next in linked {
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(seen)
}

/// Dependency fixpoint over the reach set, visiting candidates in sorted order.
pub fn dependency_set(
    registry: &ServiceRegistry,
    target: &str,
) -> Result<DependencySet, RegistryError> {
    let order: Vec<String> = reach_set(registry, target)?.into_iter().collect();
    dependency_set_in_order(registry, target, &order)
}

/// Dependency fixpoint visiting candidates in the given order. Services in
/// `order` outside the reach set are ignored.
pub fn dependency_set_in_order(
    registry: &ServiceRegistry,
    target: &str,
    order: &[String],
) -> Result<DependencySet, RegistryError> {
    let reach = reach_set(registry, target)?;
    let mut reads: BTreeSet<String> = registry.require(target)?.reads.clone();
    let mut members = BTreeSet::from([target.to_owned()]);
    let mut rounds = 0;
    loop {
        rounds += 1;
        let mut changed = false;
        for id in order {
            if members.contains(id) || !reach.contains(id) {
                continue;
            }
            let s = registry.require(id)?;
            if s.writes.iter().any(|w| reads.contains(w)) {
                members.insert(id.clone());
                reads.extend(s.reads.iter().cloned());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(DependencySet {
        target: target.to_owned(),
        members,
        read_closure: reads,
        rounds,
    })
}

/// Every event type handled by a member of `dep`.
pub fn event_types_for(registry: &ServiceRegistry, dep: &DependencySet) -> EventTypeSet {
    EventTypeSet::new(
        registry
            .services()
            .iter()
            .filter(|s| dep.members.contains(&s.id))
            .flat_map(|s| s.handles.iter().copied()),
    )
}
