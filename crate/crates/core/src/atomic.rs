//! Atomic operations that missions are composed of: task selection,
//! formation and routing.

pub mod formation;
pub mod routing;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::needs::{evaluate_needs, task_utility, NeedsConfig, NeedsVector};
use crate::negotiation::{run_negotiation, Assignment, ItemId, NegotiationError, OpKind};
use crate::world::{TaskStatus, World};
use crate::{AgentId, TaskId};

pub use formation::{assign_slots, formation_slots, FormationError, FormationSpec, Shape};
pub use routing::{multi_route, route, MultiRoute, Path, Reservations, RouteError};

/// Negotiates which of `agents` serves which of the open `tasks` and marks
/// the winners' tasks as assigned. The lowest agent id initiates.
pub fn select(
    world: &mut World,
    agents: &[AgentId],
    tasks: &[TaskId],
    needs: &NeedsConfig,
    retry_budget: u32,
) -> Result<Assignment, NegotiationError> {
    let open: Vec<ItemId> = tasks
        .iter()
        .copied()
        .filter(|t| world.tasks.get(t).is_some_and(|t| t.status == TaskStatus::Open))
        .collect();
    let Some(&initiator) = agents.iter().min() else {
        return Ok(Assignment { map: BTreeMap::new(), unassigned: open.into_iter().collect() });
    };
    if open.is_empty() {
        return Ok(Assignment::default());
    }

    let radius = world.config.sensing_radius;
    let mut profiles: BTreeMap<AgentId, NeedsVector> = BTreeMap::new();
    for &id in agents {
        let obs = world.observe(id, radius)?;
        let nv = evaluate_needs(&world.agents[&id], &obs, needs, 0.0)?;
        profiles.insert(id, nv);
    }
    let agent_snapshot = world.agents.clone();
    let task_snapshot = world.tasks.clone();
    let utility = |a: AgentId, t: ItemId| match (profiles.get(&a), agent_snapshot.get(&a), task_snapshot.get(&t)) {
        (Some(nv), Some(agent), Some(task)) => task_utility(agent, task, nv, needs),
        _ => f64::NEG_INFINITY,
    };
    let out = run_negotiation(world, initiator, OpKind::Selection, &open, &utility, retry_budget)?;
    for (&task, &agent) in &out.assignment.map {
        world.assign(task, agent);
    }
    Ok(out.assignment)
}
