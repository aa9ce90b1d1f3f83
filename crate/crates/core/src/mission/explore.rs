//! Explore domain: the team crosses to a goal formation; adversaries it
//! meets are engaged through the decision tree.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;

use super::MissionError;
use crate::atomic::{assign_slots, formation_slots, multi_route, FormationSpec};
use crate::geom::Cell;
use crate::gut::{descend, Features, Selector};
use crate::learning::CellKey;
use crate::metrics::energy_spent;
use crate::scenario::Scenario;
use crate::trace::{Draw, EventKind};
use crate::world::{Activity, World};
use crate::AgentId;

/// State features the payoff functions read: `team_ratio` (agents over
/// agents plus active adversaries), `energy_ratio` (mean energy over
/// capacity) and `goal_distance` (mean Manhattan distance to the goal over
/// width plus height).
pub fn features(world: &World, goal: Cell) -> Features {
    let n = world.agents.len() as f64;
    let active = world.adversaries.values().filter(|a| a.active).count() as f64;
    let (energy, dist) = world.agents.values().fold((0.0, 0.0), |(e, d), a| {
        (e + a.energy / a.max_energy, d + f64::from(a.pos.manhattan(goal)))
    });
    let span = f64::from(world.grid.width() + world.grid.height());
    let mean = |x: f64| if n > 0.0 { x / n } else { 0.0 };
    Features::from([
        ("team_ratio".to_string(), if n + active > 0.0 { n / (n + active) } else { 0.0 }),
        ("energy_ratio".to_string(), mean(energy)),
        ("goal_distance".to_string(), mean(dist) / span),
    ])
}

pub(super) fn run(scenario: &Scenario, world: &mut World) -> Result<(), MissionError> {
    let gut = scenario.gut.as_ref().ok_or(MissionError::MissingGut)?;
    let ex = scenario.explore.expect("validated explore section");

    let team: Vec<(AgentId, Cell)> = world.agents.values().map(|a| (a.id, a.pos)).collect();
    let spec = FormationSpec { center: ex.goal, n: team.len().max(1), radius: ex.radius, shape: ex.shape };
    let slots = formation_slots(&world.grid, &spec)?;
    let mut targets: BTreeMap<AgentId, Cell> = BTreeMap::new();
    if !team.is_empty() {
        for (slot, agent) in assign_slots(&team, &slots)?.map {
            targets.insert(agent, slots[slot as usize]);
        }
    }
    let requests: Vec<(AgentId, Cell, Cell)> = team.iter().map(|&(id, pos)| (id, pos, targets[&id])).collect();
    let routes = multi_route(&world.grid, &requests);
    for (&id, path) in &routes.paths {
        let cells = path.cells();
        world.record(EventKind::Plan { agent: id, cells: cells.clone() });
        if cells.len() > 1 {
            world.agents.get_mut(&id).expect("agent").activity = Activity::Moving(cells[1..].to_vec());
        }
    }

    let mut engaged = BTreeSet::new();
    loop {
        let arrived = !team.is_empty()
            && routes.unreachable.is_empty()
            && world.agents.values().all(|a| a.pos == targets[&a.id] && !a.activity.is_moving());
        if arrived || world.tick >= scenario.horizon {
            let cost = energy_spent(&world.events);
            world.record(EventKind::EpisodeEnd { success: arrived, cost });
            return Ok(());
        }
        world.step();

        let adversaries: Vec<(u32, Cell)> =
            world.adversaries.values().filter(|a| a.active && !engaged.contains(&a.id)).map(|a| (a.id, a.pos)).collect();
        for (adv, pos) in adversaries {
            let near = world
                .agents
                .values()
                .filter(|a| a.pos.chebyshev(pos) <= ex.encounter_radius)
                .min_by_key(|a| (a.pos.chebyshev(pos), a.id))
                .map(|a| a.id);
            let Some(agent) = near else { continue };
            engaged.insert(adv);
            let state = features(world, ex.goal);
            let descent = descend(&gut.root, &state, Selector::Argmax)?;
            for (node, eq) in &descent.solved {
                world.record(EventKind::Solve { node: node.clone(), row: eq.row.clone(), col: eq.col.clone(), value: eq.value });
            }
            let mut draws = Vec::with_capacity(descent.combination.len());
            for step in &descent.combination {
                let p = gut.hidden_p(&CellKey::new(&step.node, step.row, step.col));
                let u: f64 = world.rng().gen();
                draws.push(Draw { node: step.node.clone(), row: step.row, col: step.col, success: u < p });
            }
            let success = draws.iter().all(|d| d.success);
            world.record(EventKind::Encounter { adversary: adv, agent, draws, success });
            if !success {
                let cost = energy_spent(&world.events);
                world.record(EventKind::EpisodeEnd { success: false, cost });
                return Ok(());
            }
            world.adversaries.get_mut(&adv).expect("adversary").active = false;
        }
    }
}
