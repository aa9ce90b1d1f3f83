//! Missions: complete runs of a scenario, producing a trace.

mod explore;
mod usar;

use alloc::string::ToString;
use alloc::vec::Vec;

use thiserror::Error;

pub use explore::features;
pub use usar::BtVisit;

use crate::atomic::FormationError;
use crate::gut::GutError;
use crate::metrics::{metrics_from_trace, Metrics};
use crate::negotiation::NegotiationError;
use crate::scenario::{Mode, Scenario, ScenarioError};
use crate::trace::{Trace, TraceHeader, TRACE_FORMAT};
use crate::world::World;
use crate::WorldError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MissionError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Gut(#[from] GutError),
    #[error(transparent)]
    Negotiation(#[from] NegotiationError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Formation(#[from] FormationError),
    #[error("scenario has no gut section")]
    MissingGut,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Hash of the scenario file, copied into the trace header.
    pub scenario_hash: u64,
    /// Self-upgrade need score handed to every agent.
    pub self_upgrade: f64,
    /// Keep the behavior-tree visit log of every agent tick.
    pub log_bt: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub trace: Trace,
    pub metrics: Metrics,
    /// Behavior-tree visits, when requested.
    pub bt_log: Vec<BtVisit>,
}

pub fn run(scenario: &Scenario, seed: u64) -> Result<RunReport, MissionError> {
    run_with(scenario, seed, &RunOptions::default())
}

pub fn run_with(scenario: &Scenario, seed: u64, opts: &RunOptions) -> Result<RunReport, MissionError> {
    let mut world = scenario.build_world(seed)?;
    let bt_log = match scenario.mode {
        Mode::Usar => usar::run(scenario, &mut world, opts)?,
        Mode::Explore => {
            explore::run(scenario, &mut world)?;
            Vec::new()
        }
    };
    let trace = finish(scenario, seed, opts, world);
    let metrics = metrics_from_trace(&trace);
    Ok(RunReport { trace, metrics, bt_log })
}

fn finish(scenario: &Scenario, seed: u64, opts: &RunOptions, world: World) -> Trace {
    let header = TraceHeader {
        format: TRACE_FORMAT.to_string(),
        scenario_hash: opts.scenario_hash,
        seed,
        version: crate::VERSION.to_string(),
        mode: scenario.mode.as_str().to_string(),
        width: scenario.width,
        height: scenario.height,
        obstacles: scenario.obstacles.clone(),
    };
    Trace { header, events: world.events }
}
