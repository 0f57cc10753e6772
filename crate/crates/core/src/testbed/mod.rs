//! A miniature event-driven controller: services subscribe to event kinds,
//! keep state in a shared keyed store, and may post derived events.

pub mod behaviors;
mod controller;
pub mod fixtures;
pub mod openflow;
mod registry;
mod store;

pub use behaviors::Behavior;
pub use controller::{
    Controller, DispatchError, DispatchResult, HandlerCx, HandlerError, HandlerFailure, Probes,
    State, CASCADE_DEPTH_CAP,
};
pub use openflow::{ingest_message, MessageError, PacketInMessage};
pub use registry::{RegistryError, ServiceDescriptor, ServiceRegistry};
pub use store::{Collection, Record, StateStore, StoreError};
