//! Semantic performance fuzzing for event-driven controllers.
//!
//! The fuzzer mutates recorded choice streams, decodes them into valid
//! event sequences, replays them against the services a target depends on,
//! and flags sequences whose final event drives handling cost past a
//! threshold calibrated from normal traffic.

pub mod calibrate;
pub mod depgraph;
pub mod event;
pub mod fuzzer;
pub mod generators;
pub mod probes;
pub mod testbed;
