//! Needs-driven multi-agent cooperation on a discrete grid.
//!
//! The crate is `no_std` and only needs an allocator. Everything here is a
//! pure function of its inputs plus an explicitly seeded RNG, so two runs of
//! the same scenario and seed produce identical event logs. File formats,
//! hashing of logs and the command line live in the `sass` crate.

#![no_std]

extern crate alloc;

pub mod atomic;
pub mod bt;
mod error;
pub mod geom;
pub mod gut;
pub mod learning;
pub mod metrics;
pub mod mission;
pub mod needs;
pub mod negotiation;
pub mod rne;
pub mod scenario;
pub mod trace;
pub mod world;

pub use error::{ConfigError, WorldError};

/// Identifier of a simulated agent.
pub type AgentId = u32;
/// Identifier of a task (victim) in the world.
pub type TaskId = u32;
/// Identifier of an adversary.
pub type AdversaryId = u32;

/// Artifact version stamped into trace headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
