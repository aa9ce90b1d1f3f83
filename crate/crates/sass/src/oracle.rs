//! Brute-force verifiers behind `sass oracle --suite NAME`.
//!
//! Each suite draws seeded random instances, solves them with the library
//! and with an exhaustive method, and reports any disagreement.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sass_core::atomic::formation::assignment_cost;
use sass_core::atomic::{assign_slots, multi_route, route, Reservations};
use sass_core::geom::{Cell, Grid};
use sass_core::gut::{solve_matrix_game, Matrix};
use sass_core::negotiation::auction;
use sass_core::rne::{js_divergence, kl_divergence};

pub const SUITES: [&str; 4] = ["assignment", "paths", "games", "divergence"];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Check { name, cases: 0, failures: Vec::new() }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok && self.failures.len() < 5 {
            self.failures.push(detail());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs a named suite, or every suite for `all`.
pub fn run_suite(name: &str, seed: u64) -> Option<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match name {
        "assignment" => Some(assignment(&mut rng)),
        "paths" => Some(paths(&mut rng)),
        "games" => Some(games(&mut rng)),
        "divergence" => Some(divergence(&mut rng)),
        "all" => Some(SUITES.iter().flat_map(|s| run_suite(s, seed).expect("known suite")).collect()),
        _ => None,
    }
}

/// Best total utility over all partial one-to-one matchings.
pub fn optimum_assignment(u: &[Vec<i64>]) -> i64 {
    fn go(u: &[Vec<i64>], agent: usize, used: &mut Vec<bool>) -> i64 {
        if agent == u.len() {
            return 0;
        }
        let mut best = go(u, agent + 1, used);
        for t in 0..used.len() {
            if !used[t] {
                used[t] = true;
                best = best.max(u[agent][t] + go(u, agent + 1, used));
                used[t] = false;
            }
        }
        best
    }
    let items = u.first().map_or(0, Vec::len);
    go(u, 0, &mut vec![false; items])
}

/// Minimum total cost over all permutations.
pub fn min_cost_permutation(cost: &[Vec<u64>]) -> u64 {
    fn go(cost: &[Vec<u64>], row: usize, used: &mut Vec<bool>) -> u64 {
        if row == cost.len() {
            return 0;
        }
        let mut best = u64::MAX;
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                best = best.min(cost[row][c] + go(cost, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    go(cost, 0, &mut vec![false; cost.len()])
}

/// Shortest 4-connected path length in moves, if any.
pub fn bfs_distance(grid: &Grid, start: Cell, goal: Cell) -> Option<usize> {
    let (w, h) = (grid.width() as usize, grid.height() as usize);
    let mut dist = vec![usize::MAX; w * h];
    let idx = |c: Cell| c.y as usize * w + c.x as usize;
    let mut q = VecDeque::from([start]);
    dist[idx(start)] = 0;
    while let Some(c) = q.pop_front() {
        if c == goal {
            return Some(dist[idx(c)]);
        }
        for n in [(1, 0), (0, 1), (-1, 0), (0, -1)].map(|(dx, dy)| Cell::new(c.x + dx, c.y + dy)) {
            if grid.is_free(n) && dist[idx(n)] == usize::MAX {
                dist[idx(n)] = dist[idx(c)] + 1;
                q.push_back(n);
            }
        }
    }
    None
}

pub fn random_grid(rng: &mut ChaCha8Rng, w: u32, h: u32, density: f64) -> Grid {
    let mut g = Grid::new(w, h);
    for y in 0..h as i32 {
        for x in 0..w as i32 {
            if rng.gen_bool(density) {
                g.set_obstacle(Cell::new(x, y), true);
            }
        }
    }
    g
}

fn random_free(rng: &mut ChaCha8Rng, g: &Grid, taken: &[Cell]) -> Cell {
    loop {
        let c = Cell::new(rng.gen_range(0..g.width() as i32), rng.gen_range(0..g.height() as i32));
        if g.is_free(c) && !taken.contains(&c) {
            return c;
        }
    }
}

fn assignment(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let mut greedy = Check::new("auction utility >= half of optimum");
    let mut rounds = Check::new("auction rounds <= min(A,T)+1");
    let mut one_to_one = Check::new("auction is one-to-one");
    let mut slots = Check::new("assign_slots equals exhaustive minimum");
    for _ in 0..200 {
        let (na, nt) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let u: Vec<Vec<i64>> = (0..na).map(|_| (0..nt).map(|_| rng.gen_range(0..20)).collect()).collect();
        let agents: Vec<u32> = (0..na as u32).collect();
        let items: Vec<u32> = (0..nt as u32).collect();
        let out = auction(&agents, &items, |a, t| u[a as usize][t as usize] as f64);
        let got: i64 = out.assignment.map.iter().map(|(&t, &a)| u[a as usize][t as usize]).sum();
        let opt = optimum_assignment(&u);
        greedy.record(2 * got >= opt, || format!("{u:?}: got {got}, optimum {opt}"));
        rounds.record(out.rounds <= na.min(nt) + 1, || format!("{u:?}: {} rounds", out.rounds));
        one_to_one.record(out.assignment.is_one_to_one(), || format!("{u:?}"));
    }
    for _ in 0..100 {
        let n = rng.gen_range(1..=7);
        let g = Grid::new(12, 12);
        let mut cells = Vec::new();
        for _ in 0..2 * n {
            let c = random_free(rng, &g, &cells);
            cells.push(c);
        }
        let agents: Vec<(u32, Cell)> = cells[..n].iter().enumerate().map(|(i, &c)| (i as u32, c)).collect();
        let targets = &cells[n..];
        let cost: Vec<Vec<u64>> = agents.iter().map(|a| targets.iter().map(|&s| u64::from(a.1.manhattan(s))).collect()).collect();
        let best = min_cost_permutation(&cost);
        match assign_slots(&agents, targets) {
            Ok(a) => {
                let got = assignment_cost(&agents, targets, &a);
                slots.record(got == best && a.is_one_to_one() && a.map.len() == n, || format!("n={n}: got {got}, optimum {best}"));
            }
            Err(e) => slots.record(false, || e.to_string()),
        }
    }
    vec![greedy, rounds, one_to_one, slots]
}

fn paths(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let mut single = Check::new("A* length equals BFS");
    let mut multi = Check::new("multi_route has no vertex or swap conflicts");
    while single.cases < 100 {
        let g = random_grid(rng, 16, 16, 0.2);
        let s = random_free(rng, &g, &[]);
        let t = random_free(rng, &g, &[]);
        let oracle = bfs_distance(&g, s, t);
        let got = route(&g, s, t, &Reservations::new()).ok().map(|p| p.len());
        single.record(got == oracle, || format!("{s:?}->{t:?}: got {got:?}, bfs {oracle:?}"));
    }
    while multi.cases < 100 {
        let g = random_grid(rng, 8, 8, 0.15);
        let mut taken = Vec::new();
        let mut reqs = Vec::new();
        for id in 0..4 {
            let s = random_free(rng, &g, &taken);
            taken.push(s);
            let t = random_free(rng, &g, &taken);
            taken.push(t);
            reqs.push((id, s, t));
        }
        let mr = multi_route(&g, &reqs);
        let horizon = mr.paths.values().filter_map(|p| p.steps.last().map(|s| s.1)).max().unwrap_or(0) + 1;
        let mut bad = None;
        let ids: Vec<u32> = mr.paths.keys().copied().collect();
        for t in 0..=horizon {
            for (i, a) in ids.iter().enumerate() {
                for b in &ids[i + 1..] {
                    let (pa, pb) = (&mr.paths[a], &mr.paths[b]);
                    let here = (pa.at(t), pb.at(t));
                    if here.0.is_some() && here.0 == here.1 {
                        bad = Some(format!("vertex {a}/{b} at t={t}"));
                    }
                    if t > 0 && here.0.is_some() && here.0 == pb.at(t - 1) && here.1 == pa.at(t - 1) && here.0 != here.1 {
                        bad = Some(format!("swap {a}/{b} at t={t}"));
                    }
                }
            }
        }
        multi.record(bad.is_none(), || bad.unwrap_or_default());
    }
    vec![single, multi]
}

/// Largest gain either player gets by deviating to a pure strategy.
pub fn exploitability_oracle(a: &Matrix, row: &[f64], col: &[f64]) -> f64 {
    let v: f64 = (0..a.rows()).flat_map(|i| (0..a.cols()).map(move |j| (i, j))).map(|(i, j)| row[i] * col[j] * a.get(i, j)).sum();
    let best_row = (0..a.rows()).map(|i| (0..a.cols()).map(|j| col[j] * a.get(i, j)).sum::<f64>()).fold(f64::MIN, f64::max);
    let best_col = (0..a.cols()).map(|j| (0..a.rows()).map(|i| row[i] * a.get(i, j)).sum::<f64>()).fold(f64::MAX, f64::min);
    (best_row - v).max(v - best_col)
}

/// Pure saddle value by enumeration, when one exists.
pub fn saddle_value(a: &Matrix) -> Option<f64> {
    let maximin = (0..a.rows()).map(|i| (0..a.cols()).map(|j| a.get(i, j)).fold(f64::MAX, f64::min)).fold(f64::MIN, f64::max);
    let minimax = (0..a.cols()).map(|j| (0..a.rows()).map(|i| a.get(i, j)).fold(f64::MIN, f64::max)).fold(f64::MAX, f64::min);
    (maximin == minimax).then_some(maximin)
}

fn games(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let mut exploit = Check::new("equilibrium exploitability <= 1e-6");
    let mut saddle = Check::new("saddle value equals pure max-min");
    for _ in 0..500 {
        let (r, c) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let data: Vec<f64> = (0..r * c).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let a = Matrix::new(r, c, data).expect("shape");
        match solve_matrix_game(&a) {
            Ok(eq) => {
                let e = exploitability_oracle(&a, &eq.row, &eq.col);
                exploit.record(e <= 1e-6, || format!("{r}x{c}: exploitability {e:e}"));
            }
            Err(e) => exploit.record(false, || e.to_string()),
        }
    }
    while saddle.cases < 200 {
        let (r, c) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let data: Vec<f64> = (0..r * c).map(|_| f64::from(rng.gen_range(-9..=9))).collect();
        let a = Matrix::new(r, c, data).expect("shape");
        let Some(v) = saddle_value(&a) else { continue };
        let got = solve_matrix_game(&a).map(|e| e.value);
        saddle.record(got == Ok(v), || format!("{a:?}: got {got:?}, saddle {v}"));
    }
    vec![exploit, saddle]
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn divergence(rng: &mut ChaCha8Rng) -> Vec<Check> {
    let mut closed = Check::new("Bernoulli KL matches closed form");
    let mut gibbs = Check::new("KL and JS are non-negative");
    let mut bound = Check::new("JS is at most ln 2");
    for _ in 0..1000 {
        let (p, q): (f64, f64) = (rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99));
        let expect = p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
        let got = kl_divergence(&[p, 1.0 - p], &[q, 1.0 - q]);
        closed.record((got - expect).abs() <= 1e-12, || format!("p={p} q={q}: got {got}, expected {expect}"));
        let n = rng.gen_range(2..=6);
        let (a, b) = (random_dist(rng, n), random_dist(rng, n));
        let (kl, js) = (kl_divergence(&a, &b), js_divergence(&a, &b));
        gibbs.record(kl >= -1e-12 && js >= -1e-12, || format!("kl={kl} js={js}"));
        bound.record(js <= std::f64::consts::LN_2 + 1e-12, || format!("js={js}"));
    }
    vec![closed, gibbs, bound]
}
