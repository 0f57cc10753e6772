use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{EventFilter, EventKind};

use super::behaviors::Behavior;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("service {0:?} is already registered")]
    Duplicate(String),
    #[error("service {0:?} is not registered")]
    Unknown(String),
    #[error("service {service:?} calls unregistered service {callee:?}")]
    DanglingCall { service: String, callee: String },
    #[error("invalid registry fixture: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read registry fixture {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Identity, subscriptions, call edges and declared state access of one service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceDescriptor {
    pub id: String,
    #[serde(default)]
    pub handles: Vec<EventFilter>,
    #[serde(default)]
    pub calls: BTreeSet<String>,
    #[serde(default)]
    pub reads: BTreeSet<String>,
    #[serde(default)]
    pub writes: BTreeSet<String>,
    pub behavior: Behavior,
}

impl ServiceDescriptor {
    pub fn new(id: impl Into<String>, behavior: Behavior) -> ServiceDescriptor {
        ServiceDescriptor {
            id: id.into(),
            handles: Vec::new(),
            calls: BTreeSet::new(),
            reads: BTreeSet::new(),
            writes: BTreeSet::new(),
            behavior,
        }
    }

    pub fn handling(mut self, filter: EventFilter) -> Self {
        self.handles.push(filter);
        self
    }

    pub fn calling(mut self, callee: impl Into<String>) -> Self {
        self.calls.insert(callee.into());
        self
    }

    pub fn reading(mut self, object: impl Into<String>) -> Self {
        self.reads.insert(object.into());
        self
    }

    pub fn writing(mut self, object: impl Into<String>) -> Self {
        self.writes.insert(object.into());
        self
    }

    /// The service registers at least one event handler.
    pub fn is_analyzable(&self) -> bool {
        !self.handles.is_empty()
    }

    pub fn handles_kind(&self, kind: EventKind) -> bool {
        self.handles.iter().any(|f| f.kind == kind)
    }
}

impl fmt::Display for ServiceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// Registered services, kept in registration order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ServiceRegistry {
    services: Vec<ServiceDescriptor>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl ServiceRegistry {
    pub fn new() -> ServiceRegistry {
        ServiceRegistry::default()
    }

    pub fn register(&mut self, desc: ServiceDescriptor) -> Result<String, RegistryError> {
        if self.index.contains_key(&desc.id) {
            return Err(RegistryError::Duplicate(desc.id));
        }
        let id = desc.id.clone();
        self.index.insert(id.clone(), self.services.len());
        self.services.push(desc);
        Ok(id)
    }

    /// Builds a registry from descriptors, rejecting duplicates and calls to
    /// services that are not part of the set.
    pub fn from_descriptors(
        descriptors: impl IntoIterator<Item = ServiceDescriptor>,
    ) -> Result<ServiceRegistry, RegistryError> {
        let mut registry = ServiceRegistry::new();
        for desc in descriptors {
            registry.register(desc)?;
        }
        registry.check_call_edges()?;
        Ok(registry)
    }

    /// Parses a fixture file: a JSON array of service descriptors.
    pub fn from_json(text: &str) -> Result<ServiceRegistry, RegistryError> {
        let descriptors: Vec<ServiceDescriptor> = serde_json::from_str(text)?;
        ServiceRegistry::from_descriptors(descriptors)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ServiceRegistry, RegistryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RegistryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ServiceRegistry::from_json(&text)
    }

    pub fn check_call_edges(&self) -> Result<(), RegistryError> {
        for s in &self.services {
            if let Some(callee) = s.calls.iter().find(|c| !self.index.contains_key(*c)) {
                return Err(RegistryError::DanglingCall {
                    service: s.id.clone(),
                    callee: callee.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ServiceDescriptor> {
        self.index.get(id).map(|&i| &self.services[i])
    }

    pub fn require(&self, id: &str) -> Result<&ServiceDescriptor, RegistryError> {
        self.get(id)
            .ok_or_else(|| RegistryError::Unknown(id.to_owned()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn services(&self) -> &[ServiceDescriptor] {
        &self.services
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.services.iter().map(|s| s.id.as_str())
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    /// Services that register at least one event handler, in registration order.
    pub fn list_analyzable(&self) -> Vec<String> {
        self.services
            .iter()
            .filter(|s| s.is_analyzable())
            .map(|s| s.id.clone())
            .collect()
    }
}

impl<'de> Deserialize<'de> for ServiceRegistry {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let descriptors = Vec::<ServiceDescriptor>::deserialize(deserializer)?;
        ServiceRegistry::from_descriptors(descriptors).map_err(serde::de::Error::custom)
    }
}
