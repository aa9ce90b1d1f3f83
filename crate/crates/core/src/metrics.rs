//! Run metrics, computed from a trace alone.

use alloc::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::trace::{Event, EventKind, Spawned, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsarMetrics {
    pub victims_rescued: u32,
    pub victims_total: u32,
    /// Tick by which every victim was rescued or expired.
    pub completion_tick: Option<u64>,
    pub total_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreMetrics {
    pub success: bool,
    pub cost: f64,
    pub encounters: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Metrics {
    Usar(UsarMetrics),
    Explore(ExploreMetrics),
}

/// Energy debited by moves and task executions.
pub fn energy_spent(events: &[Event]) -> f64 {
    events
        .iter()
        .map(|e| match e.event {
            EventKind::Move { cost, .. } | EventKind::Rescue { cost, .. } | EventKind::Release { cost, .. } => cost,
            _ => 0.0,
        })
        .sum()
}

pub fn usar_metrics(trace: &Trace) -> UsarMetrics {
    let mut victims = BTreeSet::new();
    let mut resolved = BTreeMap::new();
    let mut rescued = 0;
    for e in &trace.events {
        match e.event {
            EventKind::Spawn(Spawned::Task { id, .. }) => {
                victims.insert(id);
            }
            EventKind::Rescue { task, .. } => {
                rescued += 1;
                resolved.insert(task, e.tick);
            }
            EventKind::Expire { task } => {
                resolved.insert(task, e.tick);
            }
            _ => {}
        }
    }
    let completion_tick = if victims.iter().all(|v| resolved.contains_key(v)) {
        Some(resolved.values().copied().max().unwrap_or(0))
    } else {
        None
    };
    UsarMetrics { victims_rescued: rescued, victims_total: victims.len() as u32, completion_tick, total_energy: energy_spent(&trace.events) }
}

pub fn explore_metrics(trace: &Trace) -> ExploreMetrics {
    let success = trace.events.iter().rev().find_map(|e| match e.event {
        EventKind::EpisodeEnd { success, .. } => Some(success),
        _ => None,
    });
    let encounters = trace.events.iter().filter(|e| matches!(e.event, EventKind::Encounter { .. })).count() as u32;
    ExploreMetrics { success: success.unwrap_or(false), cost: energy_spent(&trace.events), encounters }
}

/// Metrics for the mode named in the trace header.
pub fn metrics_from_trace(trace: &Trace) -> Metrics {
    if trace.header.mode == "explore" {
        Metrics::Explore(explore_metrics(trace))
    } else {
        Metrics::Usar(usar_metrics(trace))
    }
}
