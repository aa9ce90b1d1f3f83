//! Grid cells, occupancy maps and the two distance metrics used throughout:
//! 4-connected Manhattan distance for motion and Chebyshev distance for
//! sensing.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn chebyshev(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }

    pub fn is_adjacent4(self, other: Cell) -> bool {
        self.manhattan(other) == 1
    }

    /// The four motion neighbours in a fixed order: east, north, west, south.
    pub fn neighbors4(self) -> [Cell; 4] {
        [
            Cell::new(self.x + 1, self.y),
            Cell::new(self.x, self.y + 1),
            Cell::new(self.x - 1, self.y),
            Cell::new(self.x, self.y - 1),
        ]
    }
}

impl From<(i32, i32)> for Cell {
    fn from((x, y): (i32, i32)) -> Self {
        Cell::new(x, y)
    }
}

/// Row-major occupancy map; `true` marks an obstacle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    width: u32,
    height: u32,
    blocked: Vec<bool>,
}

impl Grid {
    pub fn new(width: u32, height: u32) -> Self {
        Grid {
            width,
            height,
            blocked: vec![false; (width as usize) * (height as usize)],
        }
    }

    pub fn with_obstacles(width: u32, height: u32, obstacles: impl IntoIterator<Item = Cell>) -> Self {
        let mut grid = Grid::new(width, height);
        for c in obstacles {
            grid.set_obstacle(c, true);
        }
        grid
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Twice the sum of the side lengths.
    pub fn perimeter(&self) -> u32 {
        2 * (self.width + self.height)
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && (c.x as u32) < self.width && (c.y as u32) < self.height
    }

    fn index(&self, c: Cell) -> usize {
        (c.y as usize) * (self.width as usize) + c.x as usize
    }

    /// Sets or clears an obstacle. Out-of-bounds cells are ignored.
    pub fn set_obstacle(&mut self, c: Cell, blocked: bool) {
        if self.in_bounds(c) {
            let i = self.index(c);
            self.blocked[i] = blocked;
        }
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.blocked[self.index(c)]
    }

    /// In bounds and not an obstacle.
    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.blocked[self.index(c)]
    }

    pub fn obstacles(&self) -> Vec<Cell> {
        self.cells().filter(|&c| self.is_obstacle(c)).collect()
    }

    /// All cells in (y, x) scan order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height as i32).flat_map(move |y| (0..self.width as i32).map(move |x| Cell::new(x, y)))
    }

    pub fn free_neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        c.neighbors4().into_iter().filter(move |&n| self.is_free(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_on_a_diagonal() {
        let a = Cell::new(0, 0);
        let b = Cell::new(2, 2);
        assert_eq!(a.manhattan(b), 4);
        assert_eq!(a.chebyshev(b), 2);
    }

    #[test]
    fn obstacles_are_not_free() {
        let g = Grid::with_obstacles(3, 3, [Cell::new(1, 1)]);
        assert!(!g.is_free(Cell::new(1, 1)));
        assert!(g.is_free(Cell::new(0, 1)));
        assert!(!g.is_free(Cell::new(3, 0)));
        assert_eq!(g.obstacles(), alloc::vec![Cell::new(1, 1)]);
        assert_eq!(g.free_neighbors(Cell::new(0, 1)).count(), 2);
    }
}
