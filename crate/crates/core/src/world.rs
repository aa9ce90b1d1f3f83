//! Discrete-time grid world and its message bus.
//!
//! [`World::step`] is the only way time advances. Within a step the bus
//! delivers first, then agents act in ascending id order, then deadlines are
//! checked. Randomness comes from a single seeded stream owned by the world.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{Cell, Grid};
use crate::negotiation::NegotiationMessage;
use crate::trace::{Event, EventKind, Spawned};
use crate::{AdversaryId, AgentId, TaskId, WorldError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Activity {
    Idle,
    /// Remaining cells to visit; a repeated cell is a wait.
    Moving(Vec<Cell>),
    Executing(TaskId),
    Recharging,
    /// Evading a threat; holds the single step chosen for the next tick.
    Avoiding(Option<Cell>),
}

impl Activity {
    pub fn is_moving(&self) -> bool {
        matches!(self, Activity::Moving(_) | Activity::Avoiding(Some(_)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: AgentId,
    pub pos: Cell,
    pub energy: f64,
    pub max_energy: f64,
    /// The agent may move only on ticks divisible by this period (1 = every tick).
    pub move_period: u32,
    pub capability_profile: BTreeMap<String, f64>,
    pub activity: Activity,
}

impl AgentState {
    pub fn new(id: AgentId, pos: Cell, energy: f64) -> Self {
        AgentState {
            id,
            pos,
            energy,
            max_energy: energy,
            move_period: 1,
            capability_profile: BTreeMap::new(),
            activity: Activity::Idle,
        }
    }

    pub fn with_skill(mut self, name: &str, level: f64) -> Self {
        self.capability_profile.insert(name.into(), level);
        self
    }

    pub fn skill(&self, name: &str) -> f64 {
        self.capability_profile.get(name).copied().unwrap_or(0.0)
    }

    /// Every required capability is met by the agent's profile.
    pub fn can_serve(&self, task: &Task) -> bool {
        task.required_capabilities.iter().all(|(name, &min)| self.skill(name) >= min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskStatus {
    Open,
    Assigned(AgentId),
    Done,
    Expired,
}

impl TaskStatus {
    pub fn is_resolved(self) -> bool {
        matches!(self, TaskStatus::Done | TaskStatus::Expired)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: TaskId,
    pub pos: Cell,
    pub required_capabilities: BTreeMap<String, f64>,
    pub reward: f64,
    pub deadline: Option<u64>,
    pub status: TaskStatus,
}

impl Task {
    pub fn new(id: TaskId, pos: Cell, reward: f64) -> Self {
        Task {
            id,
            pos,
            required_capabilities: BTreeMap::new(),
            reward,
            deadline: None,
            status: TaskStatus::Open,
        }
    }

    pub fn requiring(mut self, name: &str, level: f64) -> Self {
        self.required_capabilities.insert(name.into(), level);
        self
    }

    pub fn with_deadline(mut self, deadline: u64) -> Self {
        self.deadline = Some(deadline);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryState {
    pub id: AdversaryId,
    pub pos: Cell,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub move_cost: f64,
    pub execute_cost: f64,
    pub recharge_rate: f64,
    pub sensing_radius: u32,
    /// Per-entity probability that perception misses an entity.
    pub omission_prob: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            move_cost: 0.5,
            execute_cost: 1.0,
            recharge_rate: 5.0,
            sensing_radius: 8,
            omission_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipient {
    Agent(AgentId),
    /// Every agent except the sender.
    Broadcast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub seq: u64,
    pub from: AgentId,
    pub to: AgentId,
    pub sent_at: u64,
    pub deliver_at: u64,
    pub msg: NegotiationMessage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageBus {
    in_flight: BTreeMap<(u64, AgentId, u64), Envelope>,
    pub delay: u64,
    pub loss_prob: f64,
    next_seq: u64,
}

impl MessageBus {
    pub fn new(delay: u64, loss_prob: f64) -> Self {
        MessageBus {
            in_flight: BTreeMap::new(),
            delay,
            loss_prob,
            next_seq: 0,
        }
    }

    pub fn in_flight(&self) -> impl Iterator<Item = &Envelope> {
        self.in_flight.values()
    }

    pub fn is_empty(&self) -> bool {
        self.in_flight.is_empty()
    }

    /// Ticks between a send and the step that delivers it.
    pub fn latency(&self) -> u64 {
        self.delay.max(1)
    }

    fn take_due(&mut self, tick: u64) -> Vec<Envelope> {
        let mut due = Vec::new();
        while let Some(entry) = self.in_flight.first_entry() {
            if entry.key().0 > tick {
                break;
            }
            due.push(entry.remove());
        }
        due
    }
}

/// What an agent perceives at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub observer: AgentId,
    pub tick: u64,
    pub visible_agents: Vec<AgentState>,
    pub visible_tasks: Vec<Task>,
    pub visible_adversaries: Vec<AdversaryState>,
}

#[derive(Debug, Clone)]
pub struct World {
    pub tick: u64,
    pub grid: Arc<Grid>,
    pub agents: BTreeMap<AgentId, AgentState>,
    pub tasks: BTreeMap<TaskId, Task>,
    pub adversaries: BTreeMap<AdversaryId, AdversaryState>,
    pub bus: MessageBus,
    pub config: WorldConfig,
    pub events: Vec<Event>,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(grid: Grid, config: WorldConfig, bus: MessageBus, seed: u64) -> Self {
        World {
            tick: 0,
            grid: Arc::new(grid),
            agents: BTreeMap::new(),
            tasks: BTreeMap::new(),
            adversaries: BTreeMap::new(),
            bus,
            config,
            events: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// The world's random stream. Callers draw from it in a fixed order.
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn record(&mut self, event: EventKind) {
        self.events.push(Event { tick: self.tick, event });
    }

    pub fn occupant(&self, c: Cell) -> Option<AgentId> {
        self.agents.values().find(|a| a.pos == c).map(|a| a.id)
    }

    fn check_cell(&self, c: Cell) -> Result<(), WorldError> {
        if !self.grid.is_free(c) {
            return Err(WorldError::InvalidCell(c));
        }
        Ok(())
    }

    pub fn add_agent(&mut self, agent: AgentState) -> Result<(), WorldError> {
        if self.agents.contains_key(&agent.id) {
            return Err(WorldError::DuplicateId(agent.id));
        }
        self.check_cell(agent.pos)?;
        if let Some(other) = self.occupant(agent.pos) {
            return Err(WorldError::Occupied(agent.pos, other));
        }
        self.record(EventKind::Spawn(Spawned::Agent {
            id: agent.id,
            pos: agent.pos,
            energy: agent.energy,
        }));
        self.agents.insert(agent.id, agent);
        Ok(())
    }

    pub fn add_task(&mut self, task: Task) -> Result<(), WorldError> {
        if self.tasks.contains_key(&task.id) {
            return Err(WorldError::DuplicateId(task.id));
        }
        self.check_cell(task.pos)?;
        self.record(EventKind::Spawn(Spawned::Task {
            id: task.id,
            pos: task.pos,
            reward: task.reward,
            deadline: task.deadline,
        }));
        self.tasks.insert(task.id, task);
        Ok(())
    }

    pub fn add_adversary(&mut self, id: AdversaryId, pos: Cell) -> Result<(), WorldError> {
        if self.adversaries.contains_key(&id) {
            return Err(WorldError::DuplicateId(id));
        }
        self.check_cell(pos)?;
        self.record(EventKind::Spawn(Spawned::Adversary { id, pos }));
        self.adversaries.insert(id, AdversaryState { id, pos, active: true });
        Ok(())
    }

    /// Enqueues a message. Each envelope is dropped with probability
    /// `loss_prob`, drawn from the world stream at send time; drops are
    /// recorded immediately. Returns the sequence numbers of delivered-to-be
    /// envelopes.
    pub fn send(&mut self, from: AgentId, to: Recipient, msg: NegotiationMessage) -> Result<Vec<u64>, WorldError> {
        if !self.agents.contains_key(&from) {
            return Err(WorldError::UnknownAgent(from));
        }
        let recipients: Vec<AgentId> = match to {
            Recipient::Agent(id) => {
                if !self.agents.contains_key(&id) {
                    return Err(WorldError::UnknownRecipient(id));
                }
                alloc::vec![id]
            }
            Recipient::Broadcast => self.agents.keys().copied().filter(|&id| id != from).collect(),
        };
        let mut queued = Vec::new();
        for to in recipients {
            let seq = self.bus.next_seq;
            self.bus.next_seq += 1;
            let env = Envelope {
                seq,
                from,
                to,
                sent_at: self.tick,
                deliver_at: self.tick + self.bus.delay,
                msg: msg.clone(),
            };
            self.record(EventKind::Send(env.clone()));
            let lost = self.bus.loss_prob > 0.0 && self.rng.gen::<f64>() < self.bus.loss_prob;
            if lost {
                self.record(EventKind::Drop(env));
            } else {
                queued.push(seq);
                self.bus.in_flight.insert((env.deliver_at, env.from, env.seq), env);
            }
        }
        Ok(queued)
    }

    /// Advances time by one tick and returns the envelopes delivered into it.
    pub fn step(&mut self) -> Vec<Envelope> {
        self.tick += 1;
        let delivered = self.bus.take_due(self.tick);
        for env in &delivered {
            self.record(EventKind::Deliver(env.clone()));
        }
        let ids: Vec<AgentId> = self.agents.keys().copied().collect();
        let mut blocked = Vec::new();
        for id in ids {
            if self.advance_agent(id) {
                blocked.push(id);
            }
        }
        // A move into a cell vacated later in the same tick goes through.
        for id in blocked {
            self.advance_agent(id);
        }
        self.check_deadlines();
        delivered
    }

    fn try_move(&mut self, id: AgentId, to: Cell) -> bool {
        let agent = &self.agents[&id];
        let from = agent.pos;
        let cost = self.config.move_cost;
        if agent.energy < cost || agent.energy <= 0.0 || !from.is_adjacent4(to) || !self.grid.is_free(to) {
            return false;
        }
        if self.occupant(to).is_some() {
            return false;
        }
        let agent = self.agents.get_mut(&id).expect("agent exists");
        agent.pos = to;
        agent.energy = (agent.energy - cost).max(0.0);
        let energy = agent.energy;
        self.record(EventKind::Move { agent: id, from, to, energy, cost });
        true
    }

    /// Returns true when a planned move was refused because another agent
    /// stood on the next cell.
    fn advance_agent(&mut self, id: AgentId) -> bool {
        let agent = &self.agents[&id];
        let may_move = agent.move_period <= 1 || self.tick % u64::from(agent.move_period) == 0;
        match agent.activity.clone() {
            Activity::Idle => {}
            Activity::Moving(mut path) => {
                if !may_move {
                    return false;
                }
                let Some(&next) = path.first() else {
                    self.agents.get_mut(&id).unwrap().activity = Activity::Idle;
                    return false;
                };
                let pos = self.agents[&id].pos;
                let mut refused = false;
                let advanced = if next == pos {
                    true
                } else if !pos.is_adjacent4(next) {
                    path.clear();
                    false
                } else {
                    let ok = self.try_move(id, next);
                    refused = !ok && self.occupant(next).is_some();
                    ok
                };
                if advanced {
                    path.remove(0);
                }
                self.agents.get_mut(&id).unwrap().activity =
                    if path.is_empty() { Activity::Idle } else { Activity::Moving(path) };
                return refused;
            }
            Activity::Avoiding(Some(step)) => {
                if may_move {
                    self.try_move(id, step);
                    self.agents.get_mut(&id).unwrap().activity = Activity::Avoiding(None);
                }
            }
            Activity::Avoiding(None) => {}
            Activity::Recharging => {
                let rate = self.config.recharge_rate;
                let agent = self.agents.get_mut(&id).unwrap();
                agent.energy = (agent.energy + rate).min(agent.max_energy);
                let energy = agent.energy;
                if energy >= agent.max_energy {
                    agent.activity = Activity::Idle;
                }
                self.record(EventKind::Recharge { agent: id, energy });
            }
            Activity::Executing(task_id) => self.execute(id, task_id),
        }
        false
    }

    fn execute(&mut self, id: AgentId, task_id: TaskId) {
        let cost = self.config.execute_cost;
        let agent = &self.agents[&id];
        let Some(task) = self.tasks.get(&task_id) else {
            self.agents.get_mut(&id).unwrap().activity = Activity::Idle;
            return;
        };
        if agent.energy < cost || agent.energy <= 0.0 {
            return;
        }
        if task.pos != agent.pos || task.status != TaskStatus::Assigned(id) {
            self.agents.get_mut(&id).unwrap().activity = Activity::Idle;
            return;
        }
        let in_time = task.deadline.map_or(true, |d| self.tick <= d);
        if !in_time {
            self.agents.get_mut(&id).unwrap().activity = Activity::Idle;
            return;
        }
        let capable = agent.can_serve(task);
        let agent = self.agents.get_mut(&id).unwrap();
        agent.energy = (agent.energy - cost).max(0.0);
        agent.activity = Activity::Idle;
        let task = self.tasks.get_mut(&task_id).unwrap();
        if capable {
            task.status = TaskStatus::Done;
            self.record(EventKind::Rescue { task: task_id, agent: id, cost });
        } else {
            task.status = TaskStatus::Open;
            self.record(EventKind::Release { task: task_id, agent: id, cost });
        }
    }

    fn check_deadlines(&mut self) {
        let tick = self.tick;
        let expired: Vec<TaskId> = self
            .tasks
            .values()
            .filter(|t| !t.status.is_resolved() && t.deadline.is_some_and(|d| d < tick))
            .map(|t| t.id)
            .collect();
        for id in expired {
            self.tasks.get_mut(&id).unwrap().status = TaskStatus::Expired;
            self.record(EventKind::Expire { task: id });
        }
    }

    /// Marks a task as bound to an agent after an acknowledged award.
    pub fn assign(&mut self, task: TaskId, agent: AgentId) -> bool {
        match self.tasks.get_mut(&task) {
            Some(t) if t.status == TaskStatus::Open => {
                t.status = TaskStatus::Assigned(agent);
                self.record(EventKind::Assign { task, agent });
                true
            }
            _ => false,
        }
    }

    /// Entities within Chebyshev distance `radius` of the agent.
    pub fn observe(&self, agent_id: AgentId, radius: u32) -> Result<Observation, WorldError> {
        let me = self.agents.get(&agent_id).ok_or(WorldError::UnknownAgent(agent_id))?;
        let near = |c: Cell| me.pos.chebyshev(c) <= radius;
        Ok(Observation {
            observer: agent_id,
            tick: self.tick,
            visible_agents: self.agents.values().filter(|a| a.id != agent_id && near(a.pos)).cloned().collect(),
            visible_tasks: self.tasks.values().filter(|t| near(t.pos)).cloned().collect(),
            visible_adversaries: self.adversaries.values().filter(|a| a.active && near(a.pos)).cloned().collect(),
        })
    }

    /// Like [`World::observe`], but each entity is independently missed with
    /// probability `omission_prob`. Draws nothing when the probability is 0.
    pub fn observe_noisy(&mut self, agent_id: AgentId, radius: u32, omission_prob: f64) -> Result<Observation, WorldError> {
        let mut obs = self.observe(agent_id, radius)?;
        if omission_prob > 0.0 {
            let rng = &mut self.rng;
            obs.visible_agents.retain(|_| rng.gen::<f64>() >= omission_prob);
            obs.visible_tasks.retain(|_| rng.gen::<f64>() >= omission_prob);
            obs.visible_adversaries.retain(|_| rng.gen::<f64>() >= omission_prob);
        }
        Ok(obs)
    }

    /// Checks the structural invariants: positions valid and distinct.
    pub fn is_valid(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.agents.values().all(|a| self.grid.is_free(a.pos) && a.energy >= 0.0 && seen.insert(a.pos))
            && self.tasks.values().all(|t| self.grid.is_free(t.pos))
            && self.adversaries.values().all(|a| self.grid.is_free(a.pos))
    }
}
