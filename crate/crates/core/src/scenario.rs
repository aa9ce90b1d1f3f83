//! In-memory scenario description and its validation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::atomic::Shape;
use crate::geom::{Cell, Grid};
use crate::gut::GutNode;
use crate::learning::CellKey;
use crate::needs::NeedsConfig;
use crate::world::{AgentState, MessageBus, Task, World, WorldConfig};
use crate::{AdversaryId, AgentId, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Usar,
    Explore,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Usar => "usar",
            Mode::Explore => "explore",
        }
    }
}

/// How USAR agents decide who rescues whom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Allocation {
    /// Agents run the full behavior tree and negotiate.
    Negotiation,
    /// Baseline: each open victim goes to a uniformly random free capable agent.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub id: AgentId,
    pub pos: Cell,
    pub energy: f64,
    pub max_energy: f64,
    pub move_period: u32,
    pub skills: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub id: TaskId,
    pub pos: Cell,
    pub reward: f64,
    pub deadline: Option<u64>,
    pub requires: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarySpec {
    pub id: AdversaryId,
    pub pos: Cell,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusConfig {
    pub delay: u64,
    pub loss_prob: f64,
    pub retry_budget: u32,
}

impl Default for BusConfig {
    fn default() -> Self {
        BusConfig { delay: 1, loss_prob: 0.0, retry_budget: 10 }
    }
}

/// Team-vs-adversary decision tree plus the outcome model encounters use.
#[derive(Debug, Clone, PartialEq)]
pub struct GutSpec {
    pub root: GutNode,
    /// True success probability per cell; cells not listed use `default_hidden`.
    pub hidden: BTreeMap<CellKey, f64>,
    pub default_hidden: f64,
    pub win_value: f64,
    pub loss_value: f64,
}

impl GutSpec {
    pub fn hidden_p(&self, key: &CellKey) -> f64 {
        self.hidden.get(key).copied().unwrap_or(self.default_hidden)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningConfig {
    pub eps_reach: f64,
    pub gamma: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig { eps_reach: 0.05, gamma: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploreConfig {
    pub goal: Cell,
    pub radius: f64,
    pub shape: Shape,
    /// Chebyshev distance at which an adversary engages the team.
    pub encounter_radius: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    pub width: u32,
    pub height: u32,
    pub obstacles: Vec<Cell>,
    pub horizon: u64,
    pub capabilities: BTreeSet<String>,
    pub agents: Vec<AgentSpec>,
    pub tasks: Vec<TaskSpec>,
    pub adversaries: Vec<AdversarySpec>,
    pub needs: NeedsConfig,
    pub world: WorldConfig,
    pub bus: BusConfig,
    pub allocation: Allocation,
    pub trust_interval: u64,
    pub gut: Option<GutSpec>,
    pub learning: LearningConfig,
    pub explore: Option<ExploreConfig>,
}

impl Scenario {
    pub fn new(name: &str, mode: Mode, width: u32, height: u32, horizon: u64) -> Self {
        Scenario {
            name: name.to_string(),
            mode,
            width,
            height,
            obstacles: Vec::new(),
            horizon,
            capabilities: BTreeSet::new(),
            agents: Vec::new(),
            tasks: Vec::new(),
            adversaries: Vec::new(),
            needs: NeedsConfig::default(),
            world: WorldConfig::default(),
            bus: BusConfig::default(),
            allocation: Allocation::Negotiation,
            trust_interval: 10,
            gut: None,
            learning: LearningConfig::default(),
            explore: None,
        }
    }

    pub fn grid(&self) -> Grid {
        Grid::with_obstacles(self.width, self.height, self.obstacles.iter().copied())
    }

    /// A fresh world populated with the scenario's entities.
    pub fn build_world(&self, seed: u64) -> Result<World, ScenarioError> {
        self.validate()?;
        let bus = MessageBus::new(self.bus.delay, self.bus.loss_prob);
        let mut w = World::new(self.grid(), self.world.clone(), bus, seed);
        for a in &self.agents {
            let mut s = AgentState::new(a.id, a.pos, a.energy);
            s.max_energy = a.max_energy;
            s.move_period = a.move_period;
            s.capability_profile = a.skills.clone();
            w.add_agent(s).map_err(|e| ScenarioError::new(Subject::Agent(a.id), e.to_string()))?;
        }
        for t in &self.tasks {
            let mut task = Task::new(t.id, t.pos, t.reward);
            task.deadline = t.deadline;
            task.required_capabilities = t.requires.clone();
            w.add_task(task).map_err(|e| ScenarioError::new(Subject::Task(t.id), e.to_string()))?;
        }
        for a in &self.adversaries {
            w.add_adversary(a.id, a.pos).map_err(|e| ScenarioError::new(Subject::Adversary(a.id), e.to_string()))?;
        }
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let err = |s: Subject, m: String| Err(ScenarioError::new(s, m));
        if self.width == 0 || self.height == 0 {
            return err(Subject::Grid, format!("grid must be at least 1x1, got {}x{}", self.width, self.height));
        }
        if self.horizon == 0 {
            return err(Subject::Horizon, "horizon must be at least 1".into());
        }
        let grid = self.grid();
        for &o in &self.obstacles {
            if !grid.in_bounds(o) {
                return err(Subject::Obstacle(o), format!("obstacle ({}, {}) is outside the grid", o.x, o.y));
            }
        }
        let place = |subject: Subject, what: String, c: Cell| -> Result<(), ScenarioError> {
            if !grid.in_bounds(c) {
                return Err(ScenarioError::new(subject, format!("{what} at ({}, {}) is outside the grid", c.x, c.y)));
            }
            if grid.is_obstacle(c) {
                return Err(ScenarioError::new(subject, format!("{what} at ({}, {}) is on an obstacle", c.x, c.y)));
            }
            Ok(())
        };
        let known = |subject: Subject, what: &str, names: &BTreeMap<String, f64>| -> Result<(), ScenarioError> {
            match names.keys().find(|n| !self.capabilities.contains(*n)) {
                Some(n) => Err(ScenarioError::new(subject, format!("{what} uses undeclared capability `{n}`"))),
                None => Ok(()),
            }
        };

        let mut ids = BTreeSet::new();
        let mut cells = BTreeSet::new();
        for a in &self.agents {
            let s = Subject::Agent(a.id);
            let what = format!("agent {}", a.id);
            if !ids.insert(a.id) {
                return err(s, format!("{what} is defined twice"));
            }
            place(s.clone(), what.clone(), a.pos)?;
            if !cells.insert(a.pos) {
                return err(s, format!("{what} shares its cell with another agent"));
            }
            if !(a.energy >= 0.0 && a.max_energy > 0.0 && a.energy <= a.max_energy) {
                return err(s, format!("{what} needs 0 <= energy <= max_energy and max_energy > 0"));
            }
            if a.move_period == 0 {
                return err(s, format!("{what} needs a move period of at least 1"));
            }
            known(s.clone(), &what, &a.skills)?;
        }
        let mut ids = BTreeSet::new();
        for t in &self.tasks {
            let s = Subject::Task(t.id);
            let what = format!("task {}", t.id);
            if !ids.insert(t.id) {
                return err(s, format!("{what} is defined twice"));
            }
            place(s.clone(), what.clone(), t.pos)?;
            if !t.reward.is_finite() {
                return err(s, format!("{what} needs a finite reward"));
            }
            known(s.clone(), &what, &t.requires)?;
        }
        let mut ids = BTreeSet::new();
        for a in &self.adversaries {
            let s = Subject::Adversary(a.id);
            let what = format!("adversary {}", a.id);
            if !ids.insert(a.id) {
                return err(s, format!("{what} is defined twice"));
            }
            place(s, what, a.pos)?;
        }
        self.needs.validate().map_err(|e| ScenarioError::new(Subject::Needs, e.to_string()))?;
        if !(0.0..=1.0).contains(&self.bus.loss_prob) {
            return err(Subject::Bus, format!("loss probability {} is outside [0, 1]", self.bus.loss_prob));
        }
        if !(0.0..1.0).contains(&self.learning.eps_reach) || !(self.learning.gamma > 0.0 && self.learning.gamma <= 1.0) {
            return err(Subject::Learning, "need 0 <= eps_reach < 1 and 0 < gamma <= 1".into());
        }
        if let Some(g) = &self.gut {
            g.root.validate().map_err(|e| ScenarioError::new(Subject::Gut(gut_subject(&e)), e.to_string()))?;
            for (key, &p) in &g.hidden {
                if !(0.0..=1.0).contains(&p) {
                    return err(Subject::Gut(key.node.clone()), format!("hidden probability {p} is outside [0, 1]"));
                }
                let Some(node) = g.root.find(&key.node) else {
                    return err(Subject::Gut(key.node.clone()), format!("hidden probability names unknown node `{}`", key.node));
                };
                if key.row >= node.rows.len() || key.col >= node.cols.len() {
                    return err(Subject::Gut(key.node.clone()), format!("hidden cell ({}, {}) is out of range", key.row, key.col));
                }
            }
            if !(0.0..=1.0).contains(&g.default_hidden) {
                return err(Subject::Gut(g.root.id.clone()), "default hidden probability is outside [0, 1]".into());
            }
        }
        if self.mode == Mode::Explore {
            let Some(e) = &self.explore else {
                return err(Subject::Explore, "explore mode needs an explore.goal".into());
            };
            place(Subject::Explore, "goal".into(), e.goal)?;
            if !(e.radius > 0.0) {
                return err(Subject::Explore, "formation radius must be positive".into());
            }
            if self.gut.is_none() {
                return err(Subject::Explore, "explore mode needs a gut section".into());
            }
        }
        Ok(())
    }
}

fn gut_subject(e: &crate::gut::GutError) -> String {
    use crate::gut::GutError::*;
    match e {
        Dimensions { node, .. } | ChildIndex { node, .. } | Level { node, .. } | Game { node, .. } => node.clone(),
        DuplicateId(id) => id.clone(),
        MissingFeature(_) | InvalidIndex { .. } => String::new(),
    }
}

/// The part of a scenario a validation error is about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Subject {
    Grid,
    Horizon,
    Obstacle(Cell),
    Agent(AgentId),
    Task(TaskId),
    Adversary(AdversaryId),
    Needs,
    Bus,
    Learning,
    Explore,
    /// A GUT node by id.
    Gut(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct ScenarioError {
    pub subject: Subject,
    pub message: String,
}

impl ScenarioError {
    pub fn new(subject: Subject, message: String) -> Self {
        ScenarioError { subject, message }
    }
}
