use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use super::registry::ServiceDescriptor;

/// Opaque value stored under a key.
pub type Record = serde_json::Value;

/// Keyed records of one state object, in insertion order.
pub type Collection = IndexMap<String, Record>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("service {service:?} read undeclared state object {object:?}")]
    UndeclaredRead { service: String, object: String },
    #[error("service {service:?} wrote undeclared state object {object:?}")]
    UndeclaredWrite { service: String, object: String },
}

/// In-memory state objects shared by all services of one controller.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StateStore {
    objects: BTreeMap<String, Collection>,
}

impl StateStore {
    pub fn new() -> StateStore {
        StateStore::default()
    }

    /// Reads an object on behalf of `service`, which must declare it in its read set.
    pub fn read(
        &self,
        service: &ServiceDescriptor,
        object: &str,
    ) -> Result<Option<&Collection>, StoreError> {
        if !service.reads.contains(object) {
            return Err(StoreError::UndeclaredRead {
                service: service.id.clone(),
                object: object.to_owned(),
            });
        }
        Ok(self.objects.get(object))
    }

    /// Opens an object for mutation on behalf of `service`, which must
    /// declare it in its write set. The object is created on first write.
    pub fn write(
        &mut self,
        service: &ServiceDescriptor,
        object: &str,
    ) -> Result<&mut Collection, StoreError> {
        if !service.writes.contains(object) {
            return Err(StoreError::UndeclaredWrite {
                service: service.id.clone(),
                object: object.to_owned(),
            });
        }
        if !self.objects.contains_key(object) {
            self.objects.insert(object.to_owned(), Collection::new());
        }
        Ok(self.objects.get_mut(object).expect("inserted above"))
    }

    /// Unchecked inspection for harnesses and tests.
    pub fn collection(&self, object: &str) -> Option<&Collection> {
        self.objects.get(object)
    }

    pub fn len_of(&self, object: &str) -> usize {
        self.objects.get(object).map_or(0, |c| c.len())
    }

    pub fn object_ids(&self) -> impl Iterator<Item = &str> {
        self.objects.keys().map(String::as_str)
    }

    /// True when every object is empty.
    pub fn is_empty(&self) -> bool {
        self.objects.values().all(|c| c.is_empty())
    }

    pub fn clear(&mut self) {
        self.objects.clear();
    }
}
