//! Formation slots and slot assignment.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Cell, Grid};
use crate::negotiation::{auction, Assignment, ItemId};
use crate::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    RegularPolygon,
    Line,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormationSpec {
    pub center: Cell,
    pub n: usize,
    pub radius: f64,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormationError {
    #[error("a formation needs at least one slot")]
    NoSlots,
    #[error("formation radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("infeasible formation: {needed} slots but only {available} free cells in reach")]
    Infeasible { needed: usize, available: usize },
    #[error("{agents} agents cannot fill {slots} slots")]
    SizeMismatch { agents: usize, slots: usize },
}

/// Largest exact matching size; bigger instances use the auction.
pub const EXACT_ASSIGN_LIMIT: usize = 8;

fn reach(spec: &FormationSpec) -> u32 {
    let r = libm::ceil(spec.radius) as u32;
    match spec.shape {
        Shape::RegularPolygon => r + 2,
        Shape::Line => (spec.n as u32).max(r) + 2,
    }
}

fn targets(spec: &FormationSpec) -> Vec<Cell> {
    let c = spec.center;
    if spec.n == 1 {
        return alloc::vec![c];
    }
    match spec.shape {
        Shape::RegularPolygon => (0..spec.n)
            .map(|k| {
                let theta = 2.0 * PI * k as f64 / spec.n as f64;
                let dx = libm::round(spec.radius * libm::cos(theta)) as i32;
                let dy = libm::round(spec.radius * libm::sin(theta)) as i32;
                Cell::new(c.x + dx, c.y + dy)
            })
            .collect(),
        Shape::Line => (1..=spec.n as i32).map(|i| Cell::new(c.x + i, c.y)).collect(),
    }
}

/// Slot cells for the formation, in slot order.
///
/// Each target cell snaps to the nearest free, not yet taken cell (squared
/// Euclidean distance, ties lowest `(x, y)`) within the reach window around
/// the center.
pub fn formation_slots(grid: &Grid, spec: &FormationSpec) -> Result<Vec<Cell>, FormationError> {
    if spec.n == 0 {
        return Err(FormationError::NoSlots);
    }
    if !(spec.radius > 0.0 && spec.radius.is_finite()) {
        return Err(FormationError::BadRadius(spec.radius));
    }
    let window = reach(spec);
    let candidates: Vec<Cell> = grid.cells().filter(|&c| grid.is_free(c) && c.chebyshev(spec.center) <= window).collect();
    if candidates.len() < spec.n {
        return Err(FormationError::Infeasible { needed: spec.n, available: candidates.len() });
    }
    let mut taken = BTreeSet::new();
    let mut slots = Vec::with_capacity(spec.n);
    for t in targets(spec) {
        let d2 = |c: &Cell| {
            let (dx, dy) = (i64::from(c.x - t.x), i64::from(c.y - t.y));
            dx * dx + dy * dy
        };
        let best = candidates
            .iter()
            .filter(|c| !taken.contains(*c))
            .min_by(|a, b| d2(a).cmp(&d2(b)).then(a.cmp(b)))
            .copied()
            .expect("enough candidates");
        taken.insert(best);
        slots.push(best);
    }
    Ok(slots)
}

/// Matches agents to slots. Items in the result are slot indices.
///
/// Up to [`EXACT_ASSIGN_LIMIT`] slots the matching minimizes total Manhattan
/// distance exactly; larger formations use the auction with utility equal to
/// minus the distance.
pub fn assign_slots(agents: &[(AgentId, Cell)], slots: &[Cell]) -> Result<Assignment, FormationError> {
    if agents.len() != slots.len() {
        return Err(FormationError::SizeMismatch { agents: agents.len(), slots: slots.len() });
    }
    let n = slots.len();
    let cost = |a: usize, s: usize| u64::from(agents[a].1.manhattan(slots[s]));
    if n > EXACT_ASSIGN_LIMIT {
        let ids: Vec<AgentId> = agents.iter().map(|a| a.0).collect();
        let items: Vec<ItemId> = (0..n as ItemId).collect();
        let pos = |id: AgentId| agents.iter().find(|a| a.0 == id).map(|a| a.1).expect("agent");
        return Ok(auction(&ids, &items, |a, s| -f64::from(pos(a).manhattan(slots[s as usize]))).assignment);
    }

    // best[mask]: minimum cost of matching agents 0..popcount(mask) to the
    // slots in mask.
    let full = (1usize << n) - 1;
    let mut best = alloc::vec![u64::MAX; 1 << n];
    best[0] = 0;
    for mask in 0..=full {
        if best[mask] == u64::MAX {
            continue;
        }
        let a = mask.count_ones() as usize;
        if a == n {
            continue;
        }
        for s in (0..n).filter(|s| mask & (1 << s) == 0) {
            let next = mask | (1 << s);
            best[next] = best[next].min(best[mask] + cost(a, s));
        }
    }
    // Walk back from the full mask; prefer the lowest slot index on ties.
    let mut assignment = Assignment::default();
    let mut mask = full;
    for a in (0..n).rev() {
        let s = (0..n)
            .filter(|&s| mask & (1 << s) != 0)
            .find(|&s| {
                let prev = mask & !(1 << s);
                best[prev] != u64::MAX && best[prev] + cost(a, s) == best[mask]
            })
            .expect("consistent table");
        assignment.map.insert(s as ItemId, agents[a].0);
        mask &= !(1 << s);
    }
    Ok(assignment)
}

/// Total Manhattan distance of a slot assignment.
pub fn assignment_cost(agents: &[(AgentId, Cell)], slots: &[Cell], a: &Assignment) -> u64 {
    a.map
        .iter()
        .map(|(&s, &id)| {
            let pos = agents.iter().find(|x| x.0 == id).expect("agent").1;
            u64::from(pos.manhattan(slots[s as usize]))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn polygon(center: Cell, n: usize, radius: f64) -> FormationSpec {
        FormationSpec { center, n, radius, shape: Shape::RegularPolygon }
    }

    #[test]
    fn single_slot_is_the_center() {
        let g = Grid::new(10, 10);
        assert_eq!(formation_slots(&g, &polygon(Cell::new(5, 5), 1, 2.0)).unwrap(), vec![Cell::new(5, 5)]);
        let g = Grid::with_obstacles(10, 10, [Cell::new(5, 5)]);
        // Nearest free cells are the four axis neighbours; (4,5) is lowest.
        assert_eq!(formation_slots(&g, &polygon(Cell::new(5, 5), 1, 2.0)).unwrap(), vec![Cell::new(4, 5)]);
    }

    #[test]
    fn square_on_open_grid() {
        let g = Grid::new(10, 10);
        let slots = formation_slots(&g, &polygon(Cell::new(5, 5), 4, 2.0)).unwrap();
        assert_eq!(slots, vec![Cell::new(7, 5), Cell::new(5, 7), Cell::new(3, 5), Cell::new(5, 3)]);
    }

    #[test]
    fn blocked_slot_snaps_to_neighbour() {
        let g = Grid::with_obstacles(10, 10, [Cell::new(7, 5)]);
        let slots = formation_slots(&g, &polygon(Cell::new(5, 5), 4, 2.0)).unwrap();
        // (6,5), (7,4), (7,6), (8,5) tie at distance 1; (6,5) is lowest.
        assert_eq!(slots[0], Cell::new(6, 5));
        assert_eq!(&slots[1..], &[Cell::new(5, 7), Cell::new(3, 5), Cell::new(5, 3)]);
    }

    #[test]
    fn line_runs_east() {
        let g = Grid::new(10, 10);
        let spec = FormationSpec { center: Cell::new(2, 2), n: 3, radius: 1.0, shape: Shape::Line };
        assert_eq!(formation_slots(&g, &spec).unwrap(), vec![Cell::new(3, 2), Cell::new(4, 2), Cell::new(5, 2)]);
    }

    #[test]
    fn crowded_formation_is_infeasible() {
        let g = Grid::new(2, 2);
        let err = formation_slots(&g, &polygon(Cell::new(0, 0), 5, 1.0)).unwrap_err();
        assert_eq!(err, FormationError::Infeasible { needed: 5, available: 4 });
    }

    #[test]
    fn assign_slot_examples() {
        let one = assign_slots(&[(4, Cell::new(0, 0))], &[Cell::new(3, 3)]).unwrap();
        assert_eq!(one.agent_of(0), Some(4));

        let agents = [(0, Cell::new(0, 0)), (1, Cell::new(10, 0))];
        let slots = [Cell::new(1, 0), Cell::new(9, 0)];
        let a = assign_slots(&agents, &slots).unwrap();
        assert_eq!((a.agent_of(0), a.agent_of(1)), (Some(0), Some(1)));
        assert_eq!(assignment_cost(&agents, &slots, &a), 2);

        // Each agent already sits on the other's listed slot.
        let agents = [(0, Cell::new(0, 0)), (1, Cell::new(1, 0))];
        let slots = [Cell::new(1, 0), Cell::new(0, 0)];
        let a = assign_slots(&agents, &slots).unwrap();
        assert_eq!(assignment_cost(&agents, &slots, &a), 0);

        assert_eq!(
            assign_slots(&agents, &slots[..1]),
            Err(FormationError::SizeMismatch { agents: 2, slots: 1 })
        );
    }

    #[test]
    fn large_formations_still_fill_every_slot() {
        let agents: Vec<(AgentId, Cell)> = (0..10).map(|i| (i, Cell::new(i as i32, 0))).collect();
        let slots: Vec<Cell> = (0..10).map(|i| Cell::new(i, 3)).collect();
        let a = assign_slots(&agents, &slots).unwrap();
        assert_eq!(a.map.len(), 10);
        assert!(a.is_one_to_one());
    }
}
