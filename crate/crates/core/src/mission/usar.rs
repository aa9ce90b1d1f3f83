//! Urban search and rescue: every agent runs the behavior tree each tick.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::{MissionError, RunOptions};
use crate::atomic::routing::{default_horizon, route_from, Reservations};
use crate::bt::{build_sass_tree, leaf, tick, tick_logged, BTNode, Registry, TickResult};
use crate::geom::Cell;
use crate::needs::{evaluate_needs, needs_distribution, task_utility, NeedLevel, NeedsVector};
use crate::negotiation::{Effect, Negotiator, OpKind, ProtocolConfig};
use crate::metrics::energy_spent;
use crate::rne::trust_matrix;
use crate::scenario::{Allocation, Scenario};
use crate::trace::{EventKind, Spawned};
use crate::world::{Activity, Envelope, Observation, TaskStatus, World};
use crate::{AgentId, TaskId};

/// Ticks for which a stalled agent treats moving neighbours as obstacles.
const STALL_BLOCK: u64 = 2;

/// Leaves visited by one agent on one tick, in visit order.
#[derive(Debug, Clone, PartialEq)]
pub struct BtVisit {
    pub tick: u64,
    pub agent: AgentId,
    pub visits: Vec<String>,
}

/// Per-agent memory carried between ticks.
struct Controller {
    negotiator: Negotiator,
    inbox: Vec<(Envelope, u64)>,
    /// Task handed out by the random baseline.
    target: Option<TaskId>,
    recharging: bool,
    plan: Option<Vec<Cell>>,
    plan_for: Option<TaskId>,
    last_pos: Cell,
    stalled: u32,
    needs: Option<NeedsVector>,
}

impl Controller {
    /// The task this agent works on: its baseline target, a task the world
    /// has bound to it, or an award not yet bound.
    fn task(&self, world: &World, id: AgentId) -> Option<TaskId> {
        self.target
            .or_else(|| world.tasks.values().find(|t| t.status == TaskStatus::Assigned(id)).map(|t| t.id))
            .or_else(|| self.negotiator.holds().next())
    }

    fn release(&mut self, task: TaskId) {
        if self.target == Some(task) {
            self.target = None;
        }
        self.negotiator.release(task);
        self.plan = None;
        self.plan_for = None;
    }
}

/// Blackboard for one agent tick.
struct Bb<'a> {
    id: AgentId,
    world: &'a mut World,
    ctl: &'a mut Controller,
    scenario: &'a Scenario,
    self_upgrade: f64,
    obs: Option<Observation>,
    utilities: BTreeMap<TaskId, f64>,
    error: Option<MissionError>,
}

impl Bb<'_> {
    fn needs(&self) -> NeedsVector {
        self.ctl.needs.expect("perceived")
    }

    fn obs(&self) -> &Observation {
        self.obs.as_ref().expect("perceived")
    }

    fn fail(&mut self, e: impl Into<MissionError>) -> TickResult {
        self.error.get_or_insert(e.into());
        TickResult::Failure
    }

    fn apply(&mut self, effects: Vec<Effect>) {
        for e in effects {
            match e {
                Effect::Send { to, msg } => {
                    if let Err(err) = self.world.send(self.id, to, msg) {
                        self.error.get_or_insert(err.into());
                    }
                }
                Effect::Record(ev) => self.world.record(ev),
                Effect::Bound { item, agent, .. } => {
                    self.world.assign(item, agent);
                }
                Effect::Won { .. } => {}
            }
        }
    }
}

fn perceive(b: &mut Bb) -> TickResult {
    let radius = b.world.config.sensing_radius;
    let omission = b.world.config.omission_prob;
    let obs = match b.world.observe_noisy(b.id, radius, omission) {
        Ok(o) => o,
        Err(e) => return b.fail(e),
    };
    let me = &b.world.agents[&b.id];
    match evaluate_needs(me, &obs, &b.scenario.needs, b.self_upgrade) {
        Ok(nv) => b.ctl.needs = Some(nv),
        Err(e) => return b.fail(crate::scenario::ScenarioError::new(crate::scenario::Subject::Needs, alloc::format!("{e}"))),
    }
    if me.activity.is_moving() && me.pos == b.ctl.last_pos {
        b.ctl.stalled += 1;
    } else {
        b.ctl.stalled = 0;
    }
    b.ctl.last_pos = me.pos;
    b.obs = Some(obs);
    TickResult::Success
}

fn safe(b: &Bb) -> bool {
    b.needs()[NeedLevel::Safety] >= b.scenario.needs.thresholds[0]
}

/// Steps to the free neighbour farthest from every visible threat.
fn evade(b: &mut Bb) -> TickResult {
    let obs = b.obs();
    let threats: Vec<Cell> = obs
        .visible_adversaries
        .iter()
        .map(|a| a.pos)
        .chain(obs.visible_agents.iter().filter(|a| a.activity.is_moving()).map(|a| a.pos))
        .collect();
    let clearance = |c: Cell| threats.iter().map(|t| c.chebyshev(*t)).min().unwrap_or(u32::MAX);
    let here = b.world.agents[&b.id].pos;
    let step = b
        .world
        .grid
        .free_neighbors(here)
        .filter(|&c| b.world.occupant(c).is_none())
        .max_by(|&x, &y| clearance(x).cmp(&clearance(y)).then(y.cmp(&x)))
        .filter(|&c| clearance(c) > clearance(here));
    b.world.agents.get_mut(&b.id).expect("agent").activity = Activity::Avoiding(step);
    TickResult::Running
}

fn basic_ok(b: &Bb) -> bool {
    let me = &b.world.agents[&b.id];
    if b.ctl.recharging {
        return me.energy >= me.max_energy;
    }
    b.needs()[NeedLevel::Basic] >= b.scenario.needs.thresholds[1]
}

fn recharge(b: &mut Bb) -> TickResult {
    b.ctl.recharging = true;
    let me = b.world.agents.get_mut(&b.id).expect("agent");
    if me.energy >= me.max_energy {
        b.ctl.recharging = false;
        return TickResult::Success;
    }
    me.activity = Activity::Recharging;
    TickResult::Running
}

fn capable(b: &Bb) -> bool {
    let me = &b.world.agents[&b.id];
    b.ctl.task(b.world, b.id).is_some()
        || b.ctl.negotiator.has_active_session()
        || !b.ctl.inbox.is_empty()
        || b.obs().visible_tasks.iter().any(|t| t.status == TaskStatus::Open && me.can_serve(t))
}

fn utilities(b: &mut Bb) -> TickResult {
    let nv = b.needs();
    let me = &b.world.agents[&b.id];
    b.utilities = b
        .obs()
        .visible_tasks
        .iter()
        .filter(|t| t.status == TaskStatus::Open)
        .map(|t| (t.id, task_utility(me, t, &nv, &b.scenario.needs)))
        .collect();
    TickResult::Success
}

fn bound_task(b: &Bb) -> Option<TaskId> {
    let task = b.ctl.task(b.world, b.id)?;
    (b.world.tasks.get(&task)?.status == TaskStatus::Assigned(b.id)).then_some(task)
}

/// Routes toward the bound task when there is no live route to it.
fn plan(b: &mut Bb) -> TickResult {
    let Some(task) = bound_task(b) else { return TickResult::Success };
    let goal = b.world.tasks[&task].pos;
    let me = &b.world.agents[&b.id];
    if me.pos == goal {
        return TickResult::Success;
    }
    let live = me.activity.is_moving() && b.ctl.plan_for == Some(task) && b.ctl.stalled < 2;
    if live || b.ctl.plan.is_some() {
        return TickResult::Success;
    }
    let mut parked = Reservations::new();
    for a in b.world.agents.values().filter(|a| a.id != b.id && a.pos != goal) {
        if !a.activity.is_moving() {
            parked.park(a.pos, 0);
        } else if b.ctl.stalled > 0 {
            for t in 0..=STALL_BLOCK {
                parked.block(a.pos, t);
            }
        }
    }
    let grid = &b.world.grid;
    let horizon = default_horizon(grid);
    let path = route_from(grid, me.pos, goal, 0, &parked, horizon)
        .or_else(|_| route_from(grid, me.pos, goal, 0, &Reservations::new(), horizon));
    match path {
        Ok(p) => {
            let cells = p.cells();
            b.world.record(EventKind::Plan { agent: b.id, cells: cells.clone() });
            b.ctl.plan = Some(cells[1..].to_vec());
            b.ctl.plan_for = Some(task);
            b.ctl.stalled = 0;
            TickResult::Success
        }
        Err(_) => TickResult::Failure,
    }
}

fn is_initiator(b: &Bb) -> bool {
    let obs = b.obs();
    let open: Vec<_> = obs.visible_tasks.iter().filter(|t| t.status == TaskStatus::Open).collect();
    let busy: Vec<AgentId> = obs
        .visible_tasks
        .iter()
        .filter_map(|t| match t.status {
            TaskStatus::Assigned(a) => Some(a),
            _ => None,
        })
        .collect();
    let me = &b.world.agents[&b.id];
    let eligible = core::iter::once(me)
        .chain(obs.visible_agents.iter())
        .filter(|a| !matches!(a.activity, Activity::Recharging | Activity::Avoiding(_)))
        .filter(|a| open.iter().any(|t| a.can_serve(t)));
    let mut lowest = None;
    let mut any_free = false;
    for a in eligible {
        lowest = Some(lowest.map_or(a.id, |l: AgentId| l.min(a.id)));
        any_free |= !busy.contains(&a.id);
    }
    lowest == Some(b.id) && any_free
}

fn negotiate(b: &mut Bb) -> TickResult {
    if b.scenario.allocation == Allocation::Random {
        return TickResult::Success;
    }
    let utilities = core::mem::take(&mut b.utilities);
    let busy = bound_task(b).is_some();
    let bid = |_: OpKind, item: TaskId| match utilities.get(&item) {
        Some(&u) if !busy => u,
        _ => f64::NEG_INFINITY,
    };
    let inbox = core::mem::take(&mut b.ctl.inbox);
    for (env, at) in inbox {
        let effects = b.ctl.negotiator.deliver(&env, at, &bid);
        b.apply(effects);
    }
    let now = b.world.tick;
    let effects = b.ctl.negotiator.poll(now, &bid);
    b.apply(effects);
    b.ctl.negotiator.take_finished();

    if !b.ctl.negotiator.has_active_session() && is_initiator(b) {
        // Bindings made earlier this tick are not in the observation yet.
        let world = &*b.world;
        let items: Vec<TaskId> = b
            .obs()
            .visible_tasks
            .iter()
            .filter(|t| t.status == TaskStatus::Open && world.tasks.get(&t.id).is_some_and(|w| w.status == TaskStatus::Open))
            .map(|t| t.id)
            .collect();
        if items.is_empty() {
            b.utilities = utilities;
            return TickResult::Success;
        }
        match b.ctl.negotiator.open(now, OpKind::Selection, &items, &bid) {
            Ok((_, effects)) => b.apply(effects),
            Err(e) => return b.fail(e),
        }
    }
    b.utilities = utilities;
    TickResult::Success
}

fn execute(b: &mut Bb) -> TickResult {
    let Some(task) = b.ctl.task(b.world, b.id) else { return TickResult::Success };
    let Some(t) = b.world.tasks.get(&task) else {
        b.ctl.release(task);
        return TickResult::Success;
    };
    match t.status {
        TaskStatus::Assigned(a) if a == b.id => {
            let goal = t.pos;
            let me = b.world.agents.get_mut(&b.id).expect("agent");
            if me.pos == goal {
                me.activity = Activity::Executing(task);
                b.ctl.plan = None;
            } else if let Some(cells) = b.ctl.plan.take() {
                me.activity = Activity::Moving(cells);
            }
            TickResult::Running
        }
        // Awarded but not yet bound.
        TaskStatus::Open => TickResult::Running,
        _ => {
            b.ctl.release(task);
            TickResult::Success
        }
    }
}

fn registry<'a>() -> Registry<Bb<'a>> {
    Registry::new()
        .action(leaf::PERCEIVE, perceive)
        .condition(leaf::SAFE, safe)
        .action(leaf::EVADE, evade)
        .condition(leaf::BASIC_OK, basic_ok)
        .action(leaf::RECHARGE, recharge)
        .condition(leaf::CAPABLE, capable)
        .action(leaf::UTILITY, utilities)
        .action(leaf::PLAN, plan)
        .action(leaf::NEGOTIATE, negotiate)
        .action(leaf::EXECUTE, execute)
}

fn allocate_randomly(world: &mut World, controllers: &mut BTreeMap<AgentId, Controller>) {
    let open: Vec<TaskId> = world.tasks.values().filter(|t| t.status == TaskStatus::Open).map(|t| t.id).collect();
    for task in open {
        let t = &world.tasks[&task];
        let free: Vec<AgentId> = world
            .agents
            .values()
            .filter(|a| {
                let c = &controllers[&a.id];
                c.target.is_none() && !c.recharging && a.can_serve(t)
            })
            .map(|a| a.id)
            .collect();
        if free.is_empty() {
            continue;
        }
        let pick = free[world.rng().gen_range(0..free.len())];
        world.assign(task, pick);
        controllers.get_mut(&pick).expect("agent").target = Some(task);
    }
}

fn snapshot_trust(world: &mut World, controllers: &BTreeMap<AgentId, Controller>) {
    let dists: Vec<(AgentId, [f64; 5])> =
        controllers.iter().filter_map(|(&id, c)| c.needs.map(|nv| (id, needs_distribution(&nv).0))).collect();
    if dists.is_empty() {
        return;
    }
    let tm = trust_matrix(&dists);
    world.record(EventKind::TrustSnapshot { agents: tm.agents, matrix: tm.values });
}

pub(super) fn run(scenario: &Scenario, world: &mut World, opts: &RunOptions) -> Result<Vec<BtVisit>, MissionError> {
    let cfg = ProtocolConfig::for_bus(&world.bus, scenario.bus.retry_budget);
    let mut controllers: BTreeMap<AgentId, Controller> = world
        .agents
        .values()
        .map(|a| {
            let ctl = Controller {
                negotiator: Negotiator::new(a.id, cfg),
                inbox: Vec::new(),
                target: None,
                recharging: false,
                plan: None,
                plan_for: None,
                last_pos: a.pos,
                stalled: 0,
                needs: None,
            };
            (a.id, ctl)
        })
        .collect();
    let tree: BTNode = build_sass_tree();
    let mut log = Vec::new();

    loop {
        let all_done = world.tasks.values().all(|t| t.status.is_resolved());
        if all_done || world.tick >= scenario.horizon {
            let rescued = world.events.iter().filter(|e| matches!(e.event, EventKind::Rescue { .. })).count();
            let victims =
                world.events.iter().filter(|e| matches!(e.event, EventKind::Spawn(Spawned::Task { .. }))).count();
            let cost = energy_spent(&world.events);
            world.record(EventKind::EpisodeEnd { success: rescued == victims, cost });
            return Ok(log);
        }
        if scenario.allocation == Allocation::Random {
            allocate_randomly(world, &mut controllers);
        }
        let ids: Vec<AgentId> = controllers.keys().copied().collect();
        for id in ids {
            let ctl = controllers.get_mut(&id).expect("controller");
            let now = world.tick;
            let mut bb = Bb {
                id,
                world: &mut *world,
                ctl,
                scenario,
                self_upgrade: opts.self_upgrade,
                obs: None,
                utilities: BTreeMap::new(),
                error: None,
            };
            let reg: Registry<Bb> = registry();
            if opts.log_bt {
                let mut visits = Vec::new();
                tick_logged(&tree, &reg, &mut bb, &mut visits).expect("tree wiring");
                log.push(BtVisit { tick: now, agent: id, visits });
            } else {
                tick(&tree, &reg, &mut bb).expect("tree wiring");
            }
            if let Some(e) = bb.error {
                return Err(e);
            }
        }
        if scenario.trust_interval > 0 && world.tick % scenario.trust_interval == 0 {
            snapshot_trust(world, &controllers);
        }
        let delivered = world.step();
        let now = world.tick;
        for env in delivered {
            if let Some(c) = controllers.get_mut(&env.to) {
                c.inbox.push((env, now));
            }
        }
    }
}
