//! The line-oriented scenario file format.
//!
//! ```text
//! format: sass-scenario v1
//! mode: usar
//! grid: 8 8
//! horizon: 200
//! capability: rescue
//! agent: id=0 pos=0,0 energy=100 period=1 skills=rescue:0.4
//! task: id=0 pos=6,6 reward=10 deadline=120 requires=rescue:0.3
//! ```
//!
//! One `key: value` per line; `#` starts a comment. Record keys (`agent`,
//! `task`, `adversary`, `gut.*`) take space-separated `field=value` pairs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use thiserror::Error;

use sass_core::atomic::Shape;
use sass_core::geom::Cell;
use sass_core::gut::{GutNode, Matrix, PayoffFn};
use sass_core::learning::CellKey;
use sass_core::scenario::{
    AdversarySpec, AgentSpec, Allocation, ExploreConfig, GutSpec, Mode, Scenario, Subject, TaskSpec,
};

pub const SCENARIO_FORMAT: &str = "sass-scenario v1";

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: `{key}`: {message}")]
    Parse { line: usize, key: String, message: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
}

impl LoadError {
    fn parse(line: usize, key: &str, message: impl Into<String>) -> Self {
        LoadError::Parse { line, key: key.to_string(), message: message.into() }
    }
}

/// FNV-1a 64 of a byte string.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Reads and validates a scenario file; also returns the hash of its bytes.
pub fn load_scenario(path: &Path) -> Result<(Scenario, u64), LoadError> {
    let bytes = std::fs::read(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    let text = String::from_utf8_lossy(&bytes);
    Ok((parse_scenario(&text)?, fnv1a64(&bytes)))
}

#[derive(Default)]
struct NodeDecl {
    line: usize,
    level: Option<usize>,
    rows: Vec<String>,
    cols: Vec<String>,
    parent: Option<(String, usize, usize)>,
    constant: Option<Matrix>,
    terms: Vec<(String, Matrix)>,
}

/// Where each validated entity was declared, for error messages.
#[derive(Default)]
struct Lines {
    agents: BTreeMap<u32, usize>,
    tasks: BTreeMap<u32, usize>,
    adversaries: BTreeMap<u32, usize>,
    obstacles: BTreeMap<(i32, i32), usize>,
    keys: BTreeMap<String, usize>,
    nodes: BTreeMap<String, usize>,
}

impl Lines {
    fn section(&self, prefix: &str) -> usize {
        self.keys.iter().filter(|(k, _)| k.starts_with(prefix)).map(|(_, &l)| l).min().unwrap_or(0)
    }

    fn of(&self, subject: &Subject) -> usize {
        match subject {
            Subject::Grid => self.section("grid"),
            Subject::Horizon => self.section("horizon"),
            Subject::Obstacle(c) => self.obstacles.get(&(c.x, c.y)).copied().unwrap_or(0),
            Subject::Agent(id) => self.agents.get(id).copied().unwrap_or(0),
            Subject::Task(id) => self.tasks.get(id).copied().unwrap_or(0),
            Subject::Adversary(id) => self.adversaries.get(id).copied().unwrap_or(0),
            Subject::Needs => self.section("needs."),
            Subject::Bus => self.section("bus."),
            Subject::Learning => self.section("learning."),
            Subject::Explore => self.section("explore.").max(self.section("mode")),
            Subject::Gut(id) => self.nodes.get(id).copied().unwrap_or_else(|| self.section("gut.")),
        }
    }
}

fn fields<'a>(line: usize, key: &str, value: &'a str) -> Result<BTreeMap<&'a str, &'a str>, LoadError> {
    let mut out = BTreeMap::new();
    for tok in value.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| LoadError::parse(line, key, format!("expected field=value, got `{tok}`")))?;
        if out.insert(k, v).is_some() {
            return Err(LoadError::parse(line, key, format!("field `{k}` given twice")));
        }
    }
    Ok(out)
}

struct Fields<'a> {
    line: usize,
    key: &'a str,
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn take(&mut self, name: &str) -> Option<&'a str> {
        self.map.remove(name)
    }

    fn require(&mut self, name: &str) -> Result<&'a str, LoadError> {
        self.take(name).ok_or_else(|| LoadError::parse(self.line, self.key, format!("missing field `{name}`")))
    }

    fn num<T: std::str::FromStr>(&self, name: &str, v: &str) -> Result<T, LoadError> {
        v.parse().map_err(|_| LoadError::parse(self.line, self.key, format!("field `{name}`: bad number `{v}`")))
    }

    fn required_num<T: std::str::FromStr>(&mut self, name: &str) -> Result<T, LoadError> {
        let v = self.require(name)?;
        self.num(name, v)
    }

    fn optional_num<T: std::str::FromStr>(&mut self, name: &str) -> Result<Option<T>, LoadError> {
        self.take(name).map(|v| self.num(name, v)).transpose()
    }

    fn pair(&self, name: &str, v: &str) -> Result<(i64, i64), LoadError> {
        let bad = || LoadError::parse(self.line, self.key, format!("field `{name}`: expected a,b, got `{v}`"));
        let (a, b) = v.split_once(',').ok_or_else(bad)?;
        Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
    }

    fn cell(&mut self, name: &str) -> Result<Cell, LoadError> {
        let v = self.require(name)?;
        let (x, y) = self.pair(name, v)?;
        Ok(Cell::new(x as i32, y as i32))
    }

    fn index_pair(&mut self, name: &str) -> Result<(usize, usize), LoadError> {
        let v = self.require(name)?;
        match self.pair(name, v)? {
            (a, b) if a >= 0 && b >= 0 => Ok((a as usize, b as usize)),
            _ => Err(LoadError::parse(self.line, self.key, format!("field `{name}`: indices must be non-negative"))),
        }
    }

    fn levels(&mut self, name: &str) -> Result<BTreeMap<String, f64>, LoadError> {
        let mut out = BTreeMap::new();
        let Some(v) = self.take(name) else { return Ok(out) };
        for item in v.split(',').filter(|s| !s.is_empty()) {
            let (n, l) = item
                .split_once(':')
                .ok_or_else(|| LoadError::parse(self.line, self.key, format!("field `{name}`: expected name:level, got `{item}`")))?;
            out.insert(n.to_string(), self.num(name, l)?);
        }
        Ok(out)
    }

    fn names(&mut self, name: &str) -> Result<Vec<String>, LoadError> {
        let v = self.require(name)?;
        Ok(v.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect())
    }

    fn done(self) -> Result<(), LoadError> {
        match self.map.keys().next() {
            Some(k) => Err(LoadError::parse(self.line, self.key, format!("unknown field `{k}`"))),
            None => Ok(()),
        }
    }
}

fn parse_matrix(line: usize, key: &str, v: &str) -> Result<Matrix, LoadError> {
    let rows: Vec<Vec<f64>> = v
        .split(';')
        .map(|r| r.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()
        .map_err(|_| LoadError::parse(line, key, format!("bad matrix `{v}`")))?;
    Matrix::from_rows(&rows).map_err(|e| LoadError::parse(line, key, e.to_string()))
}

fn scalar<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, LoadError> {
    v.trim().parse().map_err(|_| LoadError::parse(line, key, format!("bad value `{v}`")))
}

fn numbers<T: std::str::FromStr>(line: usize, key: &str, v: &str, n: usize) -> Result<Vec<T>, LoadError> {
    let out: Vec<T> = v.split_whitespace().map(|x| scalar(line, key, x)).collect::<Result<_, _>>()?;
    if out.len() != n {
        return Err(LoadError::parse(line, key, format!("expected {n} numbers, got {}", out.len())));
    }
    Ok(out)
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, LoadError> {
    let mut sc = Scenario::new("scenario", Mode::Usar, 1, 1, 1);
    let mut lines = Lines::default();
    let mut seen_format = false;
    let mut nodes: BTreeMap<String, NodeDecl> = BTreeMap::new();
    let mut node_order: Vec<String> = Vec::new();
    let mut hidden: BTreeMap<CellKey, f64> = BTreeMap::new();
    let mut hidden_lines: Vec<(CellKey, usize)> = Vec::new();
    let (mut default_hidden, mut win, mut loss) = (0.5, 1.0, -1.0);
    let mut has_gut_keys = false;
    let mut explore_goal: Option<Cell> = None;
    let mut explore = ExploreConfig { goal: Cell::new(0, 0), radius: 1.0, shape: Shape::RegularPolygon, encounter_radius: 1 };
    let mut saw_grid = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once(':')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| LoadError::parse(line, content, "expected `key: value`"))?;
        if !seen_format {
            if key != "format" || value != SCENARIO_FORMAT {
                return Err(LoadError::parse(line, key, format!("first line must be `format: {SCENARIO_FORMAT}`")));
            }
            seen_format = true;
            continue;
        }
        lines.keys.entry(key.to_string()).or_insert(line);
        let rec = || fields(line, key, value).map(|map| Fields { line, key, map });
        match key {
            "format" => return Err(LoadError::parse(line, key, "format given twice")),
            "name" => sc.name = value.to_string(),
            "mode" => {
                sc.mode = match value {
                    "usar" => Mode::Usar,
                    "explore" => Mode::Explore,
                    _ => return Err(LoadError::parse(line, key, format!("unknown mode `{value}`"))),
                }
            }
            "grid" => {
                let wh: Vec<u32> = numbers(line, key, value, 2)?;
                sc.width = wh[0];
                sc.height = wh[1];
                saw_grid = true;
            }
            "horizon" => sc.horizon = scalar(line, key, value)?,
            "obstacle" => {
                let xy: Vec<i32> = numbers(line, key, value, 2)?;
                lines.obstacles.entry((xy[0], xy[1])).or_insert(line);
                sc.obstacles.push(Cell::new(xy[0], xy[1]));
            }
            "capability" => sc.capabilities.extend(value.split_whitespace().map(str::to_string)),
            "agent" => {
                let mut f = rec()?;
                let id = f.required_num("id")?;
                let pos = f.cell("pos")?;
                let energy: f64 = f.required_num("energy")?;
                let max_energy = f.optional_num("max_energy")?.unwrap_or(energy);
                let move_period = f.optional_num("period")?.unwrap_or(1);
                let skills = f.levels("skills")?;
                f.done()?;
                lines.agents.entry(id).or_insert(line);
                sc.agents.push(AgentSpec { id, pos, energy, max_energy, move_period, skills });
            }
            "task" => {
                let mut f = rec()?;
                let id = f.required_num("id")?;
                let pos = f.cell("pos")?;
                let reward = f.required_num("reward")?;
                let deadline = f.optional_num("deadline")?;
                let requires = f.levels("requires")?;
                f.done()?;
                lines.tasks.entry(id).or_insert(line);
                sc.tasks.push(TaskSpec { id, pos, reward, deadline, requires });
            }
            "adversary" => {
                let mut f = rec()?;
                let id = f.required_num("id")?;
                let pos = f.cell("pos")?;
                f.done()?;
                lines.adversaries.entry(id).or_insert(line);
                sc.adversaries.push(AdversarySpec { id, pos });
            }
            "needs.safety_radius" => sc.needs.safety_radius = scalar(line, key, value)?,
            "needs.energy_full" => sc.needs.energy_full = scalar(line, key, value)?,
            "needs.thresholds" => {
                let t: Vec<f64> = numbers(line, key, value, 5)?;
                sc.needs.thresholds.copy_from_slice(&t);
            }
            "needs.alpha" => sc.needs.alpha = scalar(line, key, value)?,
            "needs.move_cost" => sc.needs.move_cost = scalar(line, key, value)?,
            "world.move_cost" => sc.world.move_cost = scalar(line, key, value)?,
            "world.execute_cost" => sc.world.execute_cost = scalar(line, key, value)?,
            "world.recharge_rate" => sc.world.recharge_rate = scalar(line, key, value)?,
            "world.sensing_radius" => sc.world.sensing_radius = scalar(line, key, value)?,
            "world.omission_prob" => sc.world.omission_prob = scalar(line, key, value)?,
            "bus.delay" => sc.bus.delay = scalar(line, key, value)?,
            "bus.loss_prob" => sc.bus.loss_prob = scalar(line, key, value)?,
            "negotiation.retry_budget" => sc.bus.retry_budget = scalar(line, key, value)?,
            "allocation" => {
                sc.allocation = match value {
                    "negotiation" => Allocation::Negotiation,
                    "random" => Allocation::Random,
                    _ => return Err(LoadError::parse(line, key, format!("unknown allocation `{value}`"))),
                }
            }
            "trust.interval" => sc.trust_interval = scalar(line, key, value)?,
            "gut.node" => {
                has_gut_keys = true;
                let mut f = rec()?;
                let id = f.require("id")?.to_string();
                let rows = f.names("rows")?;
                let cols = f.names("cols")?;
                let level = f.optional_num("level")?;
                let parent = match f.take("parent") {
                    Some(p) => {
                        let (r, c) = f.index_pair("at")?;
                        Some((p.to_string(), r, c))
                    }
                    None => None,
                };
                f.done()?;
                if nodes.contains_key(&id) {
                    return Err(LoadError::parse(line, key, format!("node `{id}` declared twice")));
                }
                lines.nodes.insert(id.clone(), line);
                node_order.push(id.clone());
                nodes.insert(id, NodeDecl { line, level, rows, cols, parent, ..NodeDecl::default() });
            }
            "gut.payoff" => {
                let mut f = rec()?;
                let node = f.require("node")?;
                let feature = f.take("feature").map(str::to_string);
                let m = parse_matrix(line, key, f.require("values")?)?;
                f.done()?;
                let decl = nodes
                    .get_mut(node)
                    .ok_or_else(|| LoadError::parse(line, key, format!("payoff for undeclared node `{node}`")))?;
                match feature {
                    Some(name) => decl.terms.push((name, m)),
                    None => decl.constant = Some(m),
                }
            }
            "gut.hidden" => {
                let mut f = rec()?;
                let node = f.require("node")?.to_string();
                let (row, col) = f.index_pair("cell")?;
                let p = f.required_num("p")?;
                f.done()?;
                let k = CellKey { node, row, col };
                hidden_lines.push((k.clone(), line));
                hidden.insert(k, p);
            }
            "gut.default_hidden" => default_hidden = scalar(line, key, value)?,
            "gut.win" => win = scalar(line, key, value)?,
            "gut.loss" => loss = scalar(line, key, value)?,
            "learning.eps_reach" => sc.learning.eps_reach = scalar(line, key, value)?,
            "learning.gamma" => sc.learning.gamma = scalar(line, key, value)?,
            "explore.goal" => {
                let xy: Vec<i32> = numbers(line, key, value, 2)?;
                explore_goal = Some(Cell::new(xy[0], xy[1]));
            }
            "explore.radius" => explore.radius = scalar(line, key, value)?,
            "explore.shape" => {
                explore.shape = match value {
                    "polygon" => Shape::RegularPolygon,
                    "line" => Shape::Line,
                    _ => return Err(LoadError::parse(line, key, format!("unknown shape `{value}`"))),
                }
            }
            "explore.encounter_radius" => explore.encounter_radius = scalar(line, key, value)?,
            _ => return Err(LoadError::parse(line, key, "unknown key")),
        }
    }
    if !seen_format {
        return Err(LoadError::parse(1, "format", format!("missing `format: {SCENARIO_FORMAT}` header")));
    }
    if !saw_grid {
        return Err(LoadError::parse(0, "grid", "missing `grid: W H`"));
    }
    if let Some(goal) = explore_goal {
        explore.goal = goal;
        sc.explore = Some(explore);
    }
    if has_gut_keys {
        let root = build_tree(&mut nodes, &node_order)?;
        for (k, line) in &hidden_lines {
            if !node_order.contains(&k.node) {
                return Err(LoadError::Validation { line: *line, message: format!("hidden probability names unknown node `{}`", k.node) });
            }
        }
        sc.gut = Some(GutSpec { root, hidden, default_hidden, win_value: win, loss_value: loss });
    }
    sc.validate().map_err(|e| LoadError::Validation { line: lines.of(&e.subject), message: e.message })?;
    Ok(sc)
}

fn build_tree(nodes: &mut BTreeMap<String, NodeDecl>, order: &[String]) -> Result<GutNode, LoadError> {
    let roots: Vec<&String> = order.iter().filter(|id| nodes[*id].parent.is_none()).collect();
    let first_line = order.first().map_or(0, |id| nodes[id].line);
    let [root] = roots.as_slice() else {
        return Err(LoadError::Validation { line: first_line, message: format!("gut needs exactly one root node, found {}", roots.len()) });
    };
    for id in order {
        let d = &nodes[id];
        if let Some((p, _, _)) = &d.parent {
            if !nodes.contains_key(p) {
                return Err(LoadError::Validation { line: d.line, message: format!("node `{id}` names unknown parent `{p}`") });
            }
        }
    }
    let root = (*root).clone();
    let mut visiting = BTreeSet::new();
    assemble(&root, 0, nodes, order, &mut visiting)
}

fn assemble(
    id: &str,
    level: usize,
    nodes: &BTreeMap<String, NodeDecl>,
    order: &[String],
    visiting: &mut BTreeSet<String>,
) -> Result<GutNode, LoadError> {
    let d = &nodes[id];
    if !visiting.insert(id.to_string()) {
        return Err(LoadError::Validation { line: d.line, message: format!("node `{id}` is part of a cycle") });
    }
    if let Some(l) = d.level {
        if l != level {
            return Err(LoadError::Validation { line: d.line, message: format!("node `{id}` declares level {l} but sits at level {level}") });
        }
    }
    let constant = d.constant.clone().unwrap_or_else(|| Matrix::filled(d.rows.len().max(1), d.cols.len().max(1), 0.0));
    let mut node = GutNode {
        id: id.to_string(),
        level,
        rows: d.rows.clone(),
        cols: d.cols.clone(),
        payoff: PayoffFn { constant, terms: d.terms.clone() },
        children: BTreeMap::new(),
    };
    for child in order.iter().filter(|c| nodes[*c].parent.as_ref().is_some_and(|p| p.0 == id)) {
        let (_, r, c) = nodes[child].parent.clone().expect("parent");
        if node.children.contains_key(&(r, c)) {
            return Err(LoadError::Validation { line: nodes[child].line, message: format!("node `{id}` already has a child at ({r}, {c})") });
        }
        node.children.insert((r, c), assemble(child, level + 1, nodes, order, visiting)?);
    }
    Ok(node)
}

fn levels(m: &BTreeMap<String, f64>) -> String {
    m.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(",")
}

fn matrix(m: &Matrix) -> String {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m.get(i, j).to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}

/// Canonical text for a scenario; parsing it gives the scenario back.
pub fn scenario_to_text(sc: &Scenario) -> String {
    let mut s = String::new();
    let mut w = |line: String| {
        s.push_str(&line);
        s.push('\n');
    };
    w(format!("format: {SCENARIO_FORMAT}"));
    w(format!("name: {}", sc.name));
    w(format!("mode: {}", sc.mode.as_str()));
    w(format!("grid: {} {}", sc.width, sc.height));
    w(format!("horizon: {}", sc.horizon));
    for o in &sc.obstacles {
        w(format!("obstacle: {} {}", o.x, o.y));
    }
    if !sc.capabilities.is_empty() {
        w(format!("capability: {}", sc.capabilities.iter().cloned().collect::<Vec<_>>().join(" ")));
    }
    for a in &sc.agents {
        let mut line = format!(
            "agent: id={} pos={},{} energy={} max_energy={} period={}",
            a.id, a.pos.x, a.pos.y, a.energy, a.max_energy, a.move_period
        );
        if !a.skills.is_empty() {
            let _ = write!(line, " skills={}", levels(&a.skills));
        }
        w(line);
    }
    for t in &sc.tasks {
        let mut line = format!("task: id={} pos={},{} reward={}", t.id, t.pos.x, t.pos.y, t.reward);
        if let Some(d) = t.deadline {
            let _ = write!(line, " deadline={d}");
        }
        if !t.requires.is_empty() {
            let _ = write!(line, " requires={}", levels(&t.requires));
        }
        w(line);
    }
    for a in &sc.adversaries {
        w(format!("adversary: id={} pos={},{}", a.id, a.pos.x, a.pos.y));
    }
    let n = &sc.needs;
    w(format!("needs.safety_radius: {}", n.safety_radius));
    w(format!("needs.energy_full: {}", n.energy_full));
    w(format!("needs.thresholds: {}", n.thresholds.map(|t| t.to_string()).join(" ")));
    w(format!("needs.alpha: {}", n.alpha));
    w(format!("needs.move_cost: {}", n.move_cost));
    let c = &sc.world;
    w(format!("world.move_cost: {}", c.move_cost));
    w(format!("world.execute_cost: {}", c.execute_cost));
    w(format!("world.recharge_rate: {}", c.recharge_rate));
    w(format!("world.sensing_radius: {}", c.sensing_radius));
    w(format!("world.omission_prob: {}", c.omission_prob));
    w(format!("bus.delay: {}", sc.bus.delay));
    w(format!("bus.loss_prob: {}", sc.bus.loss_prob));
    w(format!("negotiation.retry_budget: {}", sc.bus.retry_budget));
    w(format!(
        "allocation: {}",
        match sc.allocation {
            Allocation::Negotiation => "negotiation",
            Allocation::Random => "random",
        }
    ));
    w(format!("trust.interval: {}", sc.trust_interval));
    w(format!("learning.eps_reach: {}", sc.learning.eps_reach));
    w(format!("learning.gamma: {}", sc.learning.gamma));
    if let Some(g) = &sc.gut {
        let mut parents: BTreeMap<&str, (&str, usize, usize)> = BTreeMap::new();
        for n in g.root.nodes() {
            for (&(r, c), child) in &n.children {
                parents.insert(&child.id, (&n.id, r, c));
            }
        }
        for n in g.root.nodes() {
            let mut line = format!("gut.node: id={} level={} rows={} cols={}", n.id, n.level, n.rows.join(","), n.cols.join(","));
            if let Some((p, r, c)) = parents.get(n.id.as_str()) {
                let _ = write!(line, " parent={p} at={r},{c}");
            }
            w(line);
            w(format!("gut.payoff: node={} values={}", n.id, matrix(&n.payoff.constant)));
            for (f, m) in &n.payoff.terms {
                w(format!("gut.payoff: node={} feature={} values={}", n.id, f, matrix(m)));
            }
        }
        for (k, p) in &g.hidden {
            w(format!("gut.hidden: node={} cell={},{} p={}", k.node, k.row, k.col, p));
        }
        w(format!("gut.default_hidden: {}", g.default_hidden));
        w(format!("gut.win: {}", g.win_value));
        w(format!("gut.loss: {}", g.loss_value));
    }
    if let Some(e) = &sc.explore {
        w(format!("explore.goal: {} {}", e.goal.x, e.goal.y));
        w(format!("explore.radius: {}", e.radius));
        w(format!(
            "explore.shape: {}",
            match e.shape {
                Shape::RegularPolygon => "polygon",
                Shape::Line => "line",
            }
        ));
        w(format!("explore.encounter_radius: {}", e.encounter_radius));
    }
    s
}
