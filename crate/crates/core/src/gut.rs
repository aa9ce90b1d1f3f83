//! Zero-sum matrix games and the game-theoretic utility tree built from them.
//!
//! Each tree node holds a team-vs-adversary matrix game whose payoffs are an
//! affine function of scenario features. Descending the tree solves one game
//! per level and follows the chosen joint strategy into the matching child.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Dense row-major matrix of team payoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, GameError> {
        if rows == 0 || cols == 0 {
            return Err(GameError::Empty);
        }
        if data.len() != rows * cols {
            return Err(GameError::Shape { rows, cols, len: data.len() });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, GameError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(GameError::Ragged);
        }
        Matrix::new(rows.len(), cols, rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect())
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Row player's payoff for each pure row against `col`.
    pub fn row_payoffs(&self, col: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self.get(i, j) * col[j]).sum()).collect()
    }

    /// Row player's payoff for each pure column against `row`.
    pub fn col_payoffs(&self, row: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| row[i] * self.get(i, j)).sum()).collect()
    }

    pub fn expected(&self, row: &[f64], col: &[f64]) -> f64 {
        self.row_payoffs(col).iter().zip(row).map(|(p, x)| p * x).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("{rows}x{cols} matrix needs {} entries, got {len}", rows * cols)]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("matrix rows have different lengths")]
    Ragged,
    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("no equilibrium found")]
    NoSolution,
}

/// A mixed equilibrium of a zero-sum game and its value to the row player.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    pub value: f64,
}

impl Equilibrium {
    pub fn row_support(&self) -> Vec<usize> {
        support(&self.row)
    }

    pub fn col_support(&self) -> Vec<usize> {
        support(&self.col)
    }
}

fn support(p: &[f64]) -> Vec<usize> {
    p.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| i).collect()
}

/// Largest gain either player can get by switching to a pure best response.
pub fn exploitability(a: &Matrix, row: &[f64], col: &[f64]) -> f64 {
    let v = a.expected(row, col);
    let row_gain = a.row_payoffs(col).into_iter().fold(f64::NEG_INFINITY, f64::max) - v;
    let col_gain = v - a.col_payoffs(row).into_iter().fold(f64::INFINITY, f64::min);
    row_gain.max(col_gain).max(0.0)
}

/// Matrices up to this size on both sides are solved by support enumeration.
pub const ENUMERATION_LIMIT: usize = 4;

/// Solves a two-player zero-sum game with the row player maximizing.
///
/// Up to 4x4 this enumerates equal-size supports in order of size, then rows
/// lexicographically, then columns lexicographically, and returns the first
/// equilibrium found. Larger games are solved as a linear program.
pub fn solve_matrix_game(a: &Matrix) -> Result<Equilibrium, GameError> {
    for i in 0..a.rows {
        for j in 0..a.cols {
            if !a.get(i, j).is_finite() {
                return Err(GameError::NonFinite { row: i, col: j });
            }
        }
    }
    if a.rows <= ENUMERATION_LIMIT && a.cols <= ENUMERATION_LIMIT {
        if let Some(eq) = support_enumeration(a) {
            return Ok(eq);
        }
    }
    simplex_solve(a)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> = (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect();
    all.sort();
    all
}

/// Solves `m x = b` by Gaussian elimination with partial pivoting.
fn solve_linear(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))?;
        if m[p][c].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            if f != 0.0 {
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    Some(x)
}

/// Mixed strategy over `support` (size k) that equalizes the opponent's
/// payoffs on `other`, with the common payoff as the last entry.
fn equalizer(k: usize, entry: impl Fn(usize, usize) -> f64) -> Option<Vec<f64>> {
    // Unknowns p_0..p_{k-1}, v. Rows: sum_s p_s * entry(s, t) - v = 0; sum p = 1.
    let mut m = vec![vec![0.0; k + 1]; k + 1];
    let mut b = vec![0.0; k + 1];
    for t in 0..k {
        for s in 0..k {
            m[t][s] = entry(s, t);
        }
        m[t][k] = -1.0;
    }
    for s in 0..k {
        m[k][s] = 1.0;
    }
    b[k] = 1.0;
    solve_linear(m, b)
}

fn clean(p: &mut [f64], tol: f64) -> bool {
    if p.iter().any(|&v| v < -tol) {
        return false;
    }
    for v in p.iter_mut() {
        if *v < tol {
            *v = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return false;
    }
    for v in p.iter_mut() {
        *v /= total;
    }
    true
}

fn support_enumeration(a: &Matrix) -> Option<Equilibrium> {
    let tol = 1e-9 * a.max_abs().max(1.0);
    // Pure saddle points first, with the exact entry as the value.
    for i in 0..a.rows {
        for j in 0..a.cols {
            let v = a.get(i, j);
            let row_min = (0..a.cols).map(|c| a.get(i, c)).fold(f64::INFINITY, f64::min);
            let col_max = (0..a.rows).map(|r| a.get(r, j)).fold(f64::NEG_INFINITY, f64::max);
            if v == row_min && v == col_max {
                let mut row = vec![0.0; a.rows];
                let mut col = vec![0.0; a.cols];
                row[i] = 1.0;
                col[j] = 1.0;
                return Some(Equilibrium { row, col, value: v });
            }
        }
    }
    for k in 2..=a.rows.min(a.cols) {
        for s in subsets(a.rows, k) {
            for t in subsets(a.cols, k) {
                let Some(x) = equalizer(k, |si, tj| a.get(s[si], t[tj])) else { continue };
                let Some(y) = equalizer(k, |tj, si| a.get(s[si], t[tj])) else { continue };
                let mut row = vec![0.0; a.rows];
                let mut col = vec![0.0; a.cols];
                for (si, &r) in s.iter().enumerate() {
                    row[r] = x[si];
                }
                for (tj, &c) in t.iter().enumerate() {
                    col[c] = y[tj];
                }
                if !clean(&mut row, tol) || !clean(&mut col, tol) {
                    continue;
                }
                if exploitability(a, &row, &col) <= tol {
                    let value = a.expected(&row, &col);
                    return Some(Equilibrium { row, col, value });
                }
            }
        }
    }
    None
}

/// Solves the game as `max sum q s.t. A' q <= 1, q >= 0` on a positively
/// shifted matrix, reading the row strategy off the dual.
fn simplex_solve(a: &Matrix) -> Result<Equilibrium, GameError> {
    let (m, n) = (a.rows, a.cols);
    let min = a.data.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min;
    let eps = 1e-12;
    // Tableau: m constraint rows, columns q_0..q_{n-1}, s_0..s_{m-1}, rhs.
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        for j in 0..n {
            t[i][j] = a.get(i, j) + shift;
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = 1.0;
    }
    for j in 0..n {
        t[m][j] = -1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    for _ in 0..10_000 {
        // Bland's rule: lowest-index improving column.
        let Some(enter) = (0..n + m).find(|&j| t[m][j] < -eps) else { break };
        let leave = (0..m)
            .filter(|&i| t[i][enter] > eps)
            .min_by(|&x, &y| {
                let rx = t[x][width - 1] / t[x][enter];
                let ry = t[y][width - 1] / t[y][enter];
                rx.total_cmp(&ry).then(basis[x].cmp(&basis[y]))
            })
            .ok_or(GameError::NoSolution)?;
        let p = t[leave][enter];
        for v in t[leave].iter_mut() {
            *v /= p;
        }
        for r in 0..=m {
            if r != leave {
                let f = t[r][enter];
                if f != 0.0 {
                    for c in 0..width {
                        t[r][c] -= f * t[leave][c];
                    }
                }
            }
        }
        basis[leave] = enter;
    }
    let mut col = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            col[b] = t[i][width - 1];
        }
    }
    let mut row: Vec<f64> = (0..m).map(|i| t[m][n + i].max(0.0)).collect();
    let total = t[m][width - 1];
    if total <= 0.0 || !clean(&mut row, 0.0) || !clean(&mut col, 0.0) {
        return Err(GameError::NoSolution);
    }
    let value = a.expected(&row, &col);
    Ok(Equilibrium { row, col, value })
}

/// Scenario features a payoff function reads, by name.
pub type Features = BTreeMap<String, f64>;

/// `constant + sum(feature * term)` evaluated entrywise.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffFn {
    pub constant: Matrix,
    pub terms: Vec<(String, Matrix)>,
}

impl PayoffFn {
    pub fn constant(m: Matrix) -> Self {
        PayoffFn { constant: m, terms: Vec::new() }
    }

    pub fn evaluate(&self, state: &Features) -> Result<Matrix, GutError> {
        let mut out = self.constant.clone();
        for (name, term) in &self.terms {
            let f = *state.get(name).ok_or_else(|| GutError::MissingFeature(name.clone()))?;
            for (o, t) in out.data.iter_mut().zip(&term.data) {
                *o += f * t;
            }
        }
        Ok(out)
    }

    fn dims_ok(&self, rows: usize, cols: usize) -> bool {
        core::iter::once(&self.constant)
            .chain(self.terms.iter().map(|t| &t.1))
            .all(|m| m.rows == rows && m.cols == cols)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GutNode {
    pub id: String,
    pub level: usize,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub payoff: PayoffFn,
    pub children: BTreeMap<(usize, usize), GutNode>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GutError {
    #[error("node `{node}`: payoff dimensions do not match {rows}x{cols} strategies")]
    Dimensions { node: String, rows: usize, cols: usize },
    #[error("node `{node}`: child index ({row}, {col}) is out of range")]
    ChildIndex { node: String, row: usize, col: usize },
    #[error("node `{node}` sits at level {found}, expected {expected}")]
    Level { node: String, expected: usize, found: usize },
    #[error("node id `{0}` is used twice")]
    DuplicateId(String),
    #[error("feature `{0}` is not defined in the state")]
    MissingFeature(String),
    #[error("no strategy ({row}, {col}) at level {level}")]
    InvalidIndex { level: usize, row: usize, col: usize },
    #[error("node `{node}`: {source}")]
    Game { node: String, source: GameError },
}

impl GutNode {
    pub fn leaf(id: &str, level: usize, rows: &[&str], cols: &[&str], payoff: PayoffFn) -> Self {
        GutNode {
            id: id.to_string(),
            level,
            rows: rows.iter().map(|s| s.to_string()).collect(),
            cols: cols.iter().map(|s| s.to_string()).collect(),
            payoff,
            children: BTreeMap::new(),
        }
    }

    pub fn with_child(mut self, row: usize, col: usize, child: GutNode) -> Self {
        self.children.insert((row, col), child);
        self
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.values().map(GutNode::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.values().map(GutNode::depth).max().unwrap_or(0)
    }

    /// Every node, parents before children, children in index order.
    pub fn nodes(&self) -> Vec<&GutNode> {
        let mut out = vec![self];
        for c in self.children.values() {
            out.extend(c.nodes());
        }
        out
    }

    pub fn find(&self, id: &str) -> Option<&GutNode> {
        self.nodes().into_iter().find(|n| n.id == id)
    }

    /// Same structure with payoffs replaced node by node.
    pub fn map_payoffs(&self, f: &mut impl FnMut(&GutNode) -> PayoffFn) -> GutNode {
        GutNode {
            id: self.id.clone(),
            level: self.level,
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            payoff: f(self),
            children: self.children.iter().map(|(&k, c)| (k, c.map_payoffs(f))).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), GutError> {
        let mut ids = BTreeSet::new();
        self.validate_at(self.level, &mut ids)
    }

    fn validate_at(&self, level: usize, ids: &mut BTreeSet<String>) -> Result<(), GutError> {
        if self.level != level {
            return Err(GutError::Level { node: self.id.clone(), expected: level, found: self.level });
        }
        if !ids.insert(self.id.clone()) {
            return Err(GutError::DuplicateId(self.id.clone()));
        }
        let (r, c) = (self.rows.len(), self.cols.len());
        if r == 0 || c == 0 || !self.payoff.dims_ok(r, c) {
            return Err(GutError::Dimensions { node: self.id.clone(), rows: r, cols: c });
        }
        for (&(i, j), child) in &self.children {
            if i >= r || j >= c {
                return Err(GutError::ChildIndex { node: self.id.clone(), row: i, col: j });
            }
            child.validate_at(level + 1, ids)?;
        }
        Ok(())
    }

    pub fn solve(&self, state: &Features) -> Result<Equilibrium, GutError> {
        let m = self.payoff.evaluate(state)?;
        solve_matrix_game(&m).map_err(|source| GutError::Game { node: self.id.clone(), source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    /// Highest-probability row and column, ties to the lowest index.
    Argmax,
    /// Draw row and column from the equilibrium with this seed.
    Sample(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyStep {
    pub level: usize,
    pub node: String,
    pub row: usize,
    pub col: usize,
    pub row_name: String,
    pub col_name: String,
}

pub type StrategyCombination = Vec<StrategyStep>;

#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub combination: StrategyCombination,
    /// Root game value.
    pub value: f64,
    /// Every game solved on the way down, by node id.
    pub solved: Vec<(String, Equilibrium)>,
}

fn argmax(p: &[f64]) -> usize {
    let best = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    p.iter().position(|&v| v >= best - 1e-9).unwrap_or(0)
}

fn sample(p: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&v| v > 0.0).unwrap_or(0)
}

/// Solves games from the root down along the chosen joint strategies.
pub fn descend(gut: &GutNode, state: &Features, selector: Selector) -> Result<Descent, GutError> {
    let mut rng = match selector {
        Selector::Sample(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        Selector::Argmax => None,
    };
    let mut node = gut;
    let mut out = Descent { combination: Vec::new(), value: 0.0, solved: Vec::new() };
    loop {
        let eq = node.solve(state)?;
        let (r, c) = match rng.as_mut() {
            Some(rng) => {
                let r = sample(&eq.row, rng);
                (r, sample(&eq.col, rng))
            }
            None => (argmax(&eq.row), argmax(&eq.col)),
        };
        if out.combination.is_empty() {
            out.value = eq.value;
        }
        out.combination.push(StrategyStep {
            level: node.level,
            node: node.id.clone(),
            row: r,
            col: c,
            row_name: node.rows[r].clone(),
            col_name: node.cols[c].clone(),
        });
        out.solved.push((node.id.clone(), eq));
        match node.children.get(&(r, c)) {
            Some(child) => node = child,
            None => return Ok(out),
        }
    }
}

/// Discounted sum of the combination's payoff entries, `gamma^depth`
/// weighting each level below the root.
pub fn expected_payoff(gut: &GutNode, state: &Features, combo: &[StrategyStep], gamma: f64) -> Result<f64, GutError> {
    let mut node = Some(gut);
    let mut total = 0.0;
    let mut weight = 1.0;
    for step in combo {
        let n = node.ok_or(GutError::InvalidIndex { level: step.level, row: step.row, col: step.col })?;
        if step.row >= n.rows.len() || step.col >= n.cols.len() {
            return Err(GutError::InvalidIndex { level: step.level, row: step.row, col: step.col });
        }
        total += weight * n.payoff.evaluate(state)?.get(step.row, step.col);
        weight *= gamma;
        node = n.children.get(&(step.row, step.col));
    }
    Ok(total)
}

/// A combination given by index pairs, for callers that do not need names.
pub fn combination(gut: &GutNode, picks: &[(usize, usize)]) -> Result<StrategyCombination, GutError> {
    let mut node = Some(gut);
    let mut out = Vec::new();
    for (level, &(r, c)) in picks.iter().enumerate() {
        let n = node.ok_or(GutError::InvalidIndex { level, row: r, col: c })?;
        if r >= n.rows.len() || c >= n.cols.len() {
            return Err(GutError::InvalidIndex { level, row: r, col: c });
        }
        out.push(StrategyStep {
            level: n.level,
            node: n.id.clone(),
            row: r,
            col: c,
            row_name: n.rows[r].clone(),
            col_name: n.cols[c].clone(),
        });
        node = n.children.get(&(r, c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn matching_pennies() {
        let eq = solve_matrix_game(&m(&[&[1.0, -1.0], &[-1.0, 1.0]])).unwrap();
        assert!(eq.value.abs() < 1e-9);
        for p in eq.row.iter().chain(&eq.col) {
            assert!((p - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn dominated_row_gives_pure_solution() {
        let eq = solve_matrix_game(&m(&[&[3.0, 1.0], &[2.0, 0.0]])).unwrap();
        assert_eq!((eq.row.clone(), eq.col.clone(), eq.value), (vec![1.0, 0.0], vec![0.0, 1.0], 1.0));
    }

    #[test]
    fn one_by_one() {
        let eq = solve_matrix_game(&m(&[&[-2.5]])).unwrap();
        assert_eq!((eq.row.clone(), eq.col.clone(), eq.value), (vec![1.0], vec![1.0], -2.5));
    }

    #[test]
    fn rejects_non_finite() {
        assert_eq!(
            solve_matrix_game(&m(&[&[0.0, f64::NAN]])),
            Err(GameError::NonFinite { row: 0, col: 1 })
        );
    }

    #[test]
    fn rock_paper_scissors() {
        let eq = solve_matrix_game(&m(&[&[0.0, -1.0, 1.0], &[1.0, 0.0, -1.0], &[-1.0, 1.0, 0.0]])).unwrap();
        assert!(eq.value.abs() < 1e-9);
        assert!(eq.row.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-9));
    }

    #[test]
    fn large_games_use_the_linear_program() {
        let rows: Vec<Vec<f64>> =
            (0..6).map(|i| (0..5).map(|j| f64::from(((i * 7 + j * 3) % 5) as i32) - 2.0).collect()).collect();
        let a = Matrix::from_rows(&rows).unwrap();
        let eq = solve_matrix_game(&a).unwrap();
        assert!(exploitability(&a, &eq.row, &eq.col) <= 1e-6);
    }

    fn two_level() -> GutNode {
        let child = GutNode::leaf("c", 1, &["x", "y"], &["u", "v"], PayoffFn::constant(m(&[&[3.0, 9.0], &[9.0, 9.0]])));
        GutNode::leaf("root", 0, &["a", "b"], &["p", "q"], PayoffFn::constant(m(&[&[2.0, 5.0], &[0.0, 1.0]])))
            .with_child(0, 0, child)
    }

    #[test]
    fn descent_paths() {
        let leaf = GutNode::leaf("r", 0, &["a"], &["b"], PayoffFn::constant(m(&[&[1.0]])));
        assert_eq!(descend(&leaf, &Features::new(), Selector::Argmax).unwrap().combination.len(), 1);

        let d = descend(&two_level(), &Features::new(), Selector::Argmax).unwrap();
        assert_eq!(d.combination.len(), 2);
        assert_eq!(d.value, 2.0);
        assert_eq!(d.solved.iter().map(|s| s.0.as_str()).collect::<Vec<_>>(), ["root", "c"]);
        assert_eq!((d.combination[1].row_name.as_str(), d.combination[1].col_name.as_str()), ("y", "u"));

        let s1 = descend(&two_level(), &Features::new(), Selector::Sample(4)).unwrap();
        let s2 = descend(&two_level(), &Features::new(), Selector::Sample(4)).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn expected_payoff_examples() {
        let one = GutNode::leaf("r", 0, &["a", "b"], &["c"], PayoffFn::constant(m(&[&[5.0], &[1.0]])));
        let combo = combination(&one, &[(0, 0)]).unwrap();
        assert_eq!(expected_payoff(&one, &Features::new(), &combo, 1.0).unwrap(), 5.0);

        let child = GutNode::leaf("c", 1, &["a"], &["b"], PayoffFn::constant(m(&[&[3.0]])));
        let two = GutNode::leaf("r", 0, &["a"], &["b"], PayoffFn::constant(m(&[&[2.0]]))).with_child(0, 0, child);
        let combo = combination(&two, &[(0, 0), (0, 0)]).unwrap();
        assert_eq!(expected_payoff(&two, &Features::new(), &combo, 1.0).unwrap(), 5.0);
        assert_eq!(expected_payoff(&two, &Features::new(), &combo, 0.5).unwrap(), 3.5);

        let mut bad = combo.clone();
        bad[0].row = 4;
        assert!(matches!(expected_payoff(&two, &Features::new(), &bad, 1.0), Err(GutError::InvalidIndex { .. })));
    }

    #[test]
    fn affine_payoffs_read_features() {
        let p = PayoffFn { constant: m(&[&[1.0]]), terms: vec![("team_ratio".into(), m(&[&[2.0]]))] };
        let state = Features::from([("team_ratio".to_string(), 0.25)]);
        assert_eq!(p.evaluate(&state).unwrap().get(0, 0), 1.5);
        assert_eq!(p.evaluate(&Features::new()), Err(GutError::MissingFeature("team_ratio".into())));
    }

    #[test]
    fn validation_catches_bad_trees() {
        assert_eq!(two_level().validate(), Ok(()));
        let bad = GutNode::leaf("r", 0, &["a", "b"], &["c"], PayoffFn::constant(m(&[&[1.0]])));
        assert!(matches!(bad.validate(), Err(GutError::Dimensions { .. })));
        let child = GutNode::leaf("r", 1, &["a"], &["b"], PayoffFn::constant(m(&[&[1.0]])));
        let dup = GutNode::leaf("r", 0, &["a"], &["b"], PayoffFn::constant(m(&[&[1.0]]))).with_child(0, 0, child);
        assert_eq!(dup.validate(), Err(GutError::DuplicateId("r".into())));
        let child = GutNode::leaf("c", 1, &["a"], &["b"], PayoffFn::constant(m(&[&[1.0]])));
        let oob = GutNode::leaf("r", 0, &["a"], &["b"], PayoffFn::constant(m(&[&[1.0]]))).with_child(1, 0, child);
        assert!(matches!(oob.validate(), Err(GutError::ChildIndex { .. })));
    }

    fn matrix_strategy(max: usize) -> impl Strategy<Value = Matrix> {
        (1..=max, 1..=max).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-10i32..=10, r * c)
                .prop_map(move |d| Matrix::new(r, c, d.into_iter().map(f64::from).collect()).unwrap())
        })
    }

    proptest! {
        #[test]
        fn equilibria_are_unexploitable(a in matrix_strategy(4)) {
            let eq = solve_matrix_game(&a).unwrap();
            prop_assert!(exploitability(&a, &eq.row, &eq.col) <= 1e-6);
            prop_assert!((eq.row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!((eq.col.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn saddle_value_is_maxmin(a in matrix_strategy(2)) {
            let maxmin = (0..a.rows()).map(|i| (0..a.cols()).map(|j| a.get(i, j)).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max);
            let minmax = (0..a.cols()).map(|j| (0..a.rows()).map(|i| a.get(i, j)).fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min);
            let eq = solve_matrix_game(&a).unwrap();
            if maxmin == minmax {
                prop_assert_eq!(eq.value, maxmin);
            }
        }

        #[test]
        fn scaling_scales_the_value(a in matrix_strategy(4), c in 1u32..20) {
            let c = f64::from(c) / 4.0;
            let base = solve_matrix_game(&a).unwrap();
            let scaled = solve_matrix_game(&a.scaled(c)).unwrap();
            prop_assert!((scaled.value - c * base.value).abs() <= 1e-9 * (1.0 + c * base.value.abs()));
            prop_assert_eq!(scaled.row_support(), base.row_support());
            prop_assert_eq!(scaled.col_support(), base.col_support());
        }
    }
}
