//! Space-time A* routing and prioritized multi-agent routing.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Reverse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Cell, Grid};
use crate::negotiation::{auction, ItemId};
use crate::AgentId;

/// A timed path: consecutive entries are one tick apart and either stay put
/// or move to a 4-neighbour.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    pub steps: Vec<(Cell, u64)>,
}

impl Path {
    /// Number of ticks the path spans.
    pub fn len(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.steps.len() <= 1
    }

    pub fn cells(&self) -> Vec<Cell> {
        self.steps.iter().map(|s| s.0).collect()
    }

    pub fn start_tick(&self) -> u64 {
        self.steps.first().map_or(0, |s| s.1)
    }

    /// Position at tick `t`, parked at the last cell afterwards.
    pub fn at(&self, t: u64) -> Option<Cell> {
        let first = self.steps.first()?;
        if t < first.1 {
            return None;
        }
        let idx = ((t - first.1) as usize).min(self.steps.len() - 1);
        Some(self.steps[idx].0)
    }

    pub fn is_well_formed(&self) -> bool {
        self.steps.windows(2).all(|w| w[1].1 == w[0].1 + 1 && (w[0].0 == w[1].0 || w[0].0.is_adjacent4(w[1].0)))
    }
}

/// Space-time cells other agents have claimed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Reservations {
    vertex: BTreeSet<(Cell, u64)>,
    /// `(from, to, t)`: someone moves from `from` at `t - 1` to `to` at `t`.
    edges: BTreeSet<(Cell, Cell, u64)>,
    /// Cell occupied from the given tick on.
    parked: BTreeMap<Cell, u64>,
}

impl Reservations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex.is_empty() && self.edges.is_empty() && self.parked.is_empty()
    }

    pub fn block(&mut self, cell: Cell, tick: u64) {
        self.vertex.insert((cell, tick));
    }

    pub fn park(&mut self, cell: Cell, from: u64) {
        let e = self.parked.entry(cell).or_insert(from);
        *e = (*e).min(from);
    }

    /// Claims every step of the path and its final cell from then on.
    pub fn reserve_path(&mut self, path: &Path) {
        for &(c, t) in &path.steps {
            self.vertex.insert((c, t));
        }
        for w in path.steps.windows(2) {
            if w[0].0 != w[1].0 {
                self.edges.insert((w[0].0, w[1].0, w[1].1));
            }
        }
        if let Some(&(c, t)) = path.steps.last() {
            self.park(c, t);
        }
    }

    pub fn is_blocked(&self, cell: Cell, tick: u64) -> bool {
        self.vertex.contains(&(cell, tick)) || self.parked.get(&cell).is_some_and(|&p| tick >= p)
    }

    /// Whether moving `from -> to` arriving at `tick` swaps with a claimed move.
    pub fn is_swap(&self, from: Cell, to: Cell, tick: u64) -> bool {
        self.edges.contains(&(to, from, tick))
    }

    /// Whether the cell is claimed at any tick after `tick`.
    fn claimed_after(&self, cell: Cell, tick: u64) -> bool {
        self.parked.contains_key(&cell) || self.vertex.range((cell, tick + 1)..=(cell, u64::MAX)).next().is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("cell ({}, {}) is not a free cell", .0.x, .0.y)]
    NotFree(Cell),
    #[error("no path from ({}, {}) to ({}, {}) within {horizon} ticks", .start.x, .start.y, .goal.x, .goal.y)]
    Unreachable { start: Cell, goal: Cell, horizon: u64 },
}

/// Default search horizon: four times the grid perimeter.
pub fn default_horizon(grid: &Grid) -> u64 {
    4 * u64::from(grid.perimeter())
}

/// Shortest timed path from `start` at tick 0 to `goal`.
pub fn route(grid: &Grid, start: Cell, goal: Cell, blocked: &Reservations) -> Result<Path, RouteError> {
    route_from(grid, start, goal, 0, blocked, default_horizon(grid))
}

/// A* over `(cell, tick)` with a Manhattan heuristic and unit-cost waits.
/// Expansion order: lowest f, then lowest tick, then lowest cell. The goal is
/// accepted only at a tick after which nobody else claims it.
pub fn route_from(
    grid: &Grid,
    start: Cell,
    goal: Cell,
    start_tick: u64,
    blocked: &Reservations,
    horizon: u64,
) -> Result<Path, RouteError> {
    for c in [start, goal] {
        if !grid.is_free(c) {
            return Err(RouteError::NotFree(c));
        }
    }
    let h = |c: Cell| u64::from(c.manhattan(goal));
    let mut open = BinaryHeap::new();
    let mut parent: BTreeMap<(Cell, u64), (Cell, u64)> = BTreeMap::new();
    let mut closed: BTreeSet<(Cell, u64)> = BTreeSet::new();
    open.push(Reverse((h(start), start_tick, start)));
    while let Some(Reverse((_, t, c))) = open.pop() {
        if !closed.insert((c, t)) {
            continue;
        }
        if c == goal && !blocked.claimed_after(goal, t) {
            let mut steps = alloc::vec![(c, t)];
            let mut cur = (c, t);
            while let Some(&p) = parent.get(&cur) {
                steps.push(p);
                cur = p;
            }
            steps.reverse();
            return Ok(Path { steps });
        }
        if t - start_tick >= horizon {
            continue;
        }
        let nt = t + 1;
        let moves = core::iter::once(c).chain(grid.free_neighbors(c));
        for n in moves {
            if closed.contains(&(n, nt)) || blocked.is_blocked(n, nt) || (n != c && blocked.is_swap(c, n, nt)) {
                continue;
            }
            if let alloc::collections::btree_map::Entry::Vacant(e) = parent.entry((n, nt)) {
                e.insert((c, t));
                open.push(Reverse((nt - start_tick + h(n), nt, n)));
            }
        }
    }
    Err(RouteError::Unreachable { start, goal, horizon })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MultiRoute {
    pub paths: BTreeMap<AgentId, Path>,
    pub unreachable: BTreeSet<AgentId>,
    /// Planning order, highest priority first.
    pub priority: Vec<AgentId>,
}

impl MultiRoute {
    /// Vertex and swap conflicts between planned paths, as `(a, b, tick)`.
    pub fn conflicts(&self) -> Vec<(AgentId, AgentId, u64)> {
        let end = self.paths.values().filter_map(|p| p.steps.last().map(|s| s.1)).max().unwrap_or(0);
        let start = self.paths.values().map(Path::start_tick).min().unwrap_or(0);
        let ids: Vec<AgentId> = self.paths.keys().copied().collect();
        let mut out = Vec::new();
        for t in start..=end {
            for (i, &a) in ids.iter().enumerate() {
                for &b in &ids[i + 1..] {
                    let (pa, pb) = (&self.paths[&a], &self.paths[&b]);
                    let (Some(ca), Some(cb)) = (pa.at(t), pb.at(t)) else { continue };
                    let swap = t > start
                        && matches!((pa.at(t - 1), pb.at(t - 1)), (Some(a0), Some(b0)) if a0 == cb && b0 == ca && ca != cb);
                    if ca == cb || swap {
                        out.push((a, b, t));
                    }
                }
            }
        }
        out
    }
}

/// Prioritized planning. Priority is negotiated with utility equal to minus
/// the Manhattan trip length, so shorter trips plan first (ties: lowest id).
/// Each agent treats the paths of higher-priority agents as blocked.
pub fn multi_route(grid: &Grid, requests: &[(AgentId, Cell, Cell)]) -> MultiRoute {
    let ids: Vec<AgentId> = requests.iter().map(|r| r.0).collect();
    let ranks: Vec<ItemId> = (0..requests.len() as ItemId).collect();
    let trip = |id: AgentId| {
        let r = requests.iter().find(|r| r.0 == id).expect("request");
        f64::from(r.1.manhattan(r.2))
    };
    let order = auction(&ids, &ranks, |a, _| -trip(a)).assignment;

    let mut out = MultiRoute::default();
    let mut reserved = Reservations::new();
    let horizon = default_horizon(grid);
    for (_, &id) in &order.map {
        out.priority.push(id);
        let &(_, start, goal) = requests.iter().find(|r| r.0 == id).expect("request");
        match route_from(grid, start, goal, 0, &reserved, horizon) {
            Ok(path) => {
                reserved.reserve_path(&path);
                out.paths.insert(id, path);
            }
            Err(_) => {
                out.unreachable.insert(id);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::VecDeque;

    fn bfs(grid: &Grid, start: Cell, goal: Cell) -> Option<usize> {
        let mut dist = BTreeMap::from([(start, 0usize)]);
        let mut q = VecDeque::from([start]);
        while let Some(c) = q.pop_front() {
            if c == goal {
                return Some(dist[&c]);
            }
            let d = dist[&c];
            for n in grid.free_neighbors(c) {
                dist.entry(n).or_insert_with(|| {
                    q.push_back(n);
                    d + 1
                });
            }
        }
        None
    }

    #[test]
    fn start_equals_goal() {
        let g = Grid::new(3, 3);
        let p = route(&g, Cell::new(1, 1), Cell::new(1, 1), &Reservations::new()).unwrap();
        assert_eq!(p.steps, alloc::vec![(Cell::new(1, 1), 0)]);
    }

    #[test]
    fn open_three_by_three() {
        let g = Grid::new(3, 3);
        let p = route(&g, Cell::new(0, 0), Cell::new(2, 2), &Reservations::new()).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.is_well_formed());
    }

    #[test]
    fn wall_detour_matches_bfs() {
        let wall = (0..4).map(|y| Cell::new(2, y));
        let g = Grid::with_obstacles(5, 5, wall);
        let (s, t) = (Cell::new(0, 0), Cell::new(4, 0));
        let p = route(&g, s, t, &Reservations::new()).unwrap();
        assert_eq!(Some(p.len()), bfs(&g, s, t));
        assert_eq!(p.len(), 12);
    }

    #[test]
    fn enclosed_goal_is_unreachable() {
        let g = Grid::with_obstacles(3, 3, [Cell::new(1, 0), Cell::new(0, 1), Cell::new(1, 1)]);
        let err = route(&g, Cell::new(2, 2), Cell::new(0, 0), &Reservations::new()).unwrap_err();
        assert!(matches!(err, RouteError::Unreachable { .. }));
    }

    #[test]
    fn waits_for_a_blocked_cell() {
        let g = Grid::new(3, 1);
        let mut r = Reservations::new();
        r.block(Cell::new(1, 0), 1);
        let p = route(&g, Cell::new(0, 0), Cell::new(2, 0), &r).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.at(1), Some(Cell::new(0, 0)));
    }

    #[test]
    fn disjoint_corridors_stay_shortest() {
        let g = Grid::new(6, 6);
        let m = multi_route(&g, &[(0, Cell::new(0, 0), Cell::new(5, 0)), (1, Cell::new(0, 5), Cell::new(5, 5))]);
        assert_eq!(m.paths[&0].len(), 5);
        assert_eq!(m.paths[&1].len(), 5);
        assert!(m.conflicts().is_empty());
    }

    #[test]
    fn head_on_swap_is_resolved() {
        let g = Grid::new(5, 2);
        let m = multi_route(&g, &[(0, Cell::new(0, 0), Cell::new(4, 0)), (1, Cell::new(4, 0), Cell::new(0, 0))]);
        assert!(m.unreachable.is_empty());
        assert!(m.conflicts().is_empty());
    }

    #[test]
    fn single_request_equals_route() {
        let g = Grid::new(4, 4);
        let m = multi_route(&g, &[(7, Cell::new(0, 0), Cell::new(3, 2))]);
        assert_eq!(m.paths[&7], route(&g, Cell::new(0, 0), Cell::new(3, 2), &Reservations::new()).unwrap());
    }

    #[test]
    fn shorter_trip_plans_first() {
        let g = Grid::new(8, 8);
        let m = multi_route(&g, &[(0, Cell::new(0, 0), Cell::new(7, 7)), (1, Cell::new(3, 3), Cell::new(3, 4))]);
        assert_eq!(m.priority, alloc::vec![1, 0]);
    }
}
