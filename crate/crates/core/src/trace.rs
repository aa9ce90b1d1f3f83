//! The append-only event log of a run.
//!
//! Every state change a run makes is recorded here, in the order it happens.
//! Metrics, replay and regression hashing read nothing else.

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::geom::Cell;
use crate::negotiation::{ItemId, NegotiationMessage, OpKind, SessionId};
use crate::world::Envelope;
use crate::{AdversaryId, AgentId, TaskId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    /// FNV-1a 64 of the scenario file bytes (0 for scenarios built in memory).
    pub scenario_hash: u64,
    pub seed: u64,
    pub version: String,
    pub mode: String,
    pub width: u32,
    pub height: u32,
    pub obstacles: Vec<Cell>,
}

pub const TRACE_FORMAT: &str = "sass-trace v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    pub event: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Spawned {
    Agent { id: AgentId, pos: Cell, energy: f64 },
    Task { id: TaskId, pos: Cell, reward: f64, deadline: Option<u64> },
    Adversary { id: AdversaryId, pos: Cell },
}

/// One Bernoulli outcome drawn for a GUT cell during an encounter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub node: String,
    pub row: usize,
    pub col: usize,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    Spawn(Spawned),
    Move { agent: AgentId, from: Cell, to: Cell, energy: f64, cost: f64 },
    Recharge { agent: AgentId, energy: f64 },
    Send(Envelope),
    Deliver(Envelope),
    Drop(Envelope),
    Propose { session: SessionId, op: OpKind, items: Vec<ItemId> },
    Bid { session: SessionId, item: ItemId, bidder: AgentId, utility: f64 },
    Award { session: SessionId, item: ItemId, winner: AgentId },
    Ack { session: SessionId, item: ItemId, agent: AgentId },
    Assign { task: TaskId, agent: AgentId },
    Release { task: TaskId, agent: AgentId, cost: f64 },
    Rescue { task: TaskId, agent: AgentId, cost: f64 },
    Expire { task: TaskId },
    Plan { agent: AgentId, cells: Vec<Cell> },
    Encounter { adversary: AdversaryId, agent: AgentId, draws: Vec<Draw>, success: bool },
    Solve { node: String, row: Vec<f64>, col: Vec<f64>, value: f64 },
    TrustSnapshot { agents: Vec<AgentId>, matrix: Vec<Vec<f64>> },
    EpisodeEnd { success: bool, cost: f64 },
}

impl EventKind {
    /// Short name of the variant, as listed in trace digests.
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Spawn(_) => "Spawn",
            EventKind::Move { .. } => "Move",
            EventKind::Recharge { .. } => "Recharge",
            EventKind::Send(_) => "Send",
            EventKind::Deliver(_) => "Deliver",
            EventKind::Drop(_) => "Drop",
            EventKind::Propose { .. } => "Propose",
            EventKind::Bid { .. } => "Bid",
            EventKind::Award { .. } => "Award",
            EventKind::Ack { .. } => "Ack",
            EventKind::Assign { .. } => "Assign",
            EventKind::Release { .. } => "Release",
            EventKind::Rescue { .. } => "Rescue",
            EventKind::Expire { .. } => "Expire",
            EventKind::Plan { .. } => "Plan",
            EventKind::Encounter { .. } => "Encounter",
            EventKind::Solve { .. } => "Solve",
            EventKind::TrustSnapshot { .. } => "TrustSnapshot",
            EventKind::EpisodeEnd { .. } => "EpisodeEnd",
        }
    }
}

/// Convenience for protocol assertions over the message layer.
pub fn messages<'a>(events: &'a [Event], kind: &'static str) -> impl Iterator<Item = (&'a Event, &'a NegotiationMessage)> + 'a {
    events.iter().filter_map(move |e| match &e.event {
        EventKind::Send(env) if kind == "Send" => Some((e, &env.msg)),
        EventKind::Deliver(env) if kind == "Deliver" => Some((e, &env.msg)),
        EventKind::Drop(env) if kind == "Drop" => Some((e, &env.msg)),
        _ => None,
    })
}
