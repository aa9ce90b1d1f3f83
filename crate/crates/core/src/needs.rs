//! Five-level needs hierarchy: scoring, priority gating and task utility.

use core::ops::Index;

use serde::{Deserialize, Serialize};

use crate::world::{AgentState, Observation, Task, TaskStatus};
use crate::ConfigError;

/// Need levels, lowest (most urgent) first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NeedLevel {
    Safety,
    Basic,
    Capability,
    Teaming,
    SelfUpgrade,
}

impl NeedLevel {
    pub const ALL: [NeedLevel; 5] = [
        NeedLevel::Safety,
        NeedLevel::Basic,
        NeedLevel::Capability,
        NeedLevel::Teaming,
        NeedLevel::SelfUpgrade,
    ];
}

/// Satisfaction scores in [0, 1]; 1 means fully satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeedsVector {
    pub safety: f64,
    pub basic: f64,
    pub capability: f64,
    pub teaming: f64,
    pub self_upgrade: f64,
}

impl NeedsVector {
    pub fn new(safety: f64, basic: f64, capability: f64, teaming: f64, self_upgrade: f64) -> Self {
        NeedsVector { safety, basic, capability, teaming, self_upgrade }
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        NeedsVector::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.safety, self.basic, self.capability, self.teaming, self.self_upgrade]
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| (0.0..=1.0).contains(v))
    }
}

impl Index<NeedLevel> for NeedsVector {
    type Output = f64;

    fn index(&self, level: NeedLevel) -> &f64 {
        match level {
            NeedLevel::Safety => &self.safety,
            NeedLevel::Basic => &self.basic,
            NeedLevel::Capability => &self.capability,
            NeedLevel::Teaming => &self.teaming,
            NeedLevel::SelfUpgrade => &self.self_upgrade,
        }
    }
}

/// Distribution of unmet need over the five levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeedsDistribution(pub [f64; 5]);

impl NeedsDistribution {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Floor applied to each deficit before normalization.
pub const DEFICIT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeedsConfig {
    pub safety_radius: f64,
    pub energy_full: f64,
    /// Per-level thresholds, in level order.
    pub thresholds: [f64; 5],
    /// Weight of travel cost against reward in task utility.
    pub alpha: f64,
    pub move_cost: f64,
}

impl Default for NeedsConfig {
    fn default() -> Self {
        NeedsConfig {
            safety_radius: 4.0,
            energy_full: 100.0,
            thresholds: [0.3, 0.2, 0.0, 0.0, 0.0],
            alpha: 1.0,
            move_cost: 0.5,
        }
    }
}

impl NeedsConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("safety_radius", self.safety_radius),
            ("energy_full", self.energy_full),
            ("alpha", self.alpha),
            ("move_cost", self.move_cost),
        ] {
            if !(value > 0.0) {
                return Err(ConfigError::NonPositive { name, value });
            }
        }
        for &value in &self.thresholds {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::OutOfUnitRange { name: "thresholds", value });
            }
        }
        Ok(())
    }
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Mean skill of the agent over the task's required capabilities (1 when the
/// task requires nothing).
pub fn match_score(agent: &AgentState, task: &Task) -> f64 {
    let n = task.required_capabilities.len();
    if n == 0 {
        return 1.0;
    }
    task.required_capabilities.keys().map(|name| agent.skill(name)).sum::<f64>() / n as f64
}

/// Scores the agent's five needs from what it currently perceives.
/// `self_upgrade` is supplied by the learning layer.
pub fn evaluate_needs(
    agent: &AgentState,
    obs: &Observation,
    cfg: &NeedsConfig,
    self_upgrade: f64,
) -> Result<NeedsVector, ConfigError> {
    cfg.validate()?;

    let threat = obs
        .visible_adversaries
        .iter()
        .map(|a| agent.pos.chebyshev(a.pos))
        .chain(obs.visible_agents.iter().filter(|a| a.activity.is_moving()).map(|a| agent.pos.chebyshev(a.pos)))
        .min();
    let safety = threat.map_or(1.0, |d| clamp01(f64::from(d) / cfg.safety_radius));

    let basic = clamp01(agent.energy / cfg.energy_full);

    let open = || obs.visible_tasks.iter().filter(|t| t.status == TaskStatus::Open);
    let capability = open().map(|t| match_score(agent, t)).fold(None, |best: Option<f64>, s| Some(best.map_or(s, |b| b.max(s))));
    let capability = clamp01(capability.unwrap_or(1.0));

    let live = obs.visible_tasks.iter().filter(|t| matches!(t.status, TaskStatus::Open | TaskStatus::Assigned(_)));
    let (assigned, total) = live.fold((0usize, 0usize), |(a, n), t| {
        (a + usize::from(matches!(t.status, TaskStatus::Assigned(_))), n + 1)
    });
    let teaming = if total == 0 { 1.0 } else { assigned as f64 / total as f64 };

    Ok(NeedsVector::new(safety, basic, capability, teaming, clamp01(self_upgrade)))
}

/// Normalized deficits `1 - score`, each floored at [`DEFICIT_FLOOR`].
pub fn needs_distribution(nv: &NeedsVector) -> NeedsDistribution {
    let mut d = nv.to_array().map(|s| (1.0 - s).max(DEFICIT_FLOOR));
    let total: f64 = d.iter().sum();
    for v in &mut d {
        *v /= total;
    }
    NeedsDistribution(d)
}

/// The lowest level whose score is below its threshold, or `SelfUpgrade`
/// when every level is met.
pub fn priority_gate(nv: &NeedsVector, thresholds: &[f64; 5]) -> NeedLevel {
    NeedLevel::ALL
        .into_iter()
        .zip(thresholds)
        .find(|&(level, &t)| nv[level] < t)
        .map_or(NeedLevel::SelfUpgrade, |(level, _)| level)
}

/// Needs-weighted utility of an open task for an agent, or `-inf` when the
/// agent is ineligible (missing capability or gated below `Capability`).
pub fn task_utility(agent: &AgentState, task: &Task, nv: &NeedsVector, cfg: &NeedsConfig) -> f64 {
    if !agent.can_serve(task) || priority_gate(nv, &cfg.thresholds) < NeedLevel::Capability {
        return f64::NEG_INFINITY;
    }
    let distance = f64::from(agent.pos.manhattan(task.pos));
    match_score(agent, task) * task.reward - cfg.alpha * distance * cfg.move_cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Cell;
    use crate::world::AdversaryState;
    use alloc::vec;
    use proptest::prelude::*;

    fn obs_empty() -> Observation {
        Observation { observer: 0, tick: 0, visible_agents: vec![], visible_tasks: vec![], visible_adversaries: vec![] }
    }

    fn close(a: &[f64; 5], b: &[f64; 5], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn zero_energy_has_no_basic_satisfaction() {
        let agent = AgentState::new(0, Cell::new(0, 0), 0.0);
        let nv = evaluate_needs(&agent, &obs_empty(), &NeedsConfig::default(), 0.0).unwrap();
        assert_eq!(nv.basic, 0.0);
    }

    #[test]
    fn all_satisfied_when_nothing_visible() {
        let agent = AgentState::new(0, Cell::new(0, 0), 100.0);
        let nv = evaluate_needs(&agent, &obs_empty(), &NeedsConfig::default(), 0.4).unwrap();
        assert_eq!(nv.to_array(), [1.0, 1.0, 1.0, 1.0, 0.4]);
    }

    #[test]
    fn adjacent_adversary_scales_safety() {
        let agent = AgentState::new(0, Cell::new(3, 3), 100.0);
        let mut obs = obs_empty();
        obs.visible_adversaries.push(AdversaryState { id: 0, pos: Cell::new(4, 3), active: true });
        let nv = evaluate_needs(&agent, &obs, &NeedsConfig::default(), 0.0).unwrap();
        assert_eq!(nv.safety, 0.25);
    }

    #[test]
    fn non_positive_constants_are_rejected() {
        let agent = AgentState::new(0, Cell::new(0, 0), 1.0);
        let cfg = NeedsConfig { safety_radius: 0.0, ..NeedsConfig::default() };
        assert!(matches!(
            evaluate_needs(&agent, &obs_empty(), &cfg, 0.0),
            Err(ConfigError::NonPositive { name: "safety_radius", .. })
        ));
    }

    #[test]
    fn distribution_examples() {
        let u = needs_distribution(&NeedsVector::from_array([1.0; 5]));
        assert!(close(&u.0, &[0.2; 5], 1e-12));
        let d = needs_distribution(&NeedsVector::new(1.0, 0.0, 1.0, 1.0, 1.0));
        assert!(close(&d.0, &[0.0, 1.0, 0.0, 0.0, 0.0], 1e-8));
        let d = needs_distribution(&NeedsVector::new(0.5, 0.5, 1.0, 1.0, 1.0));
        assert!(close(&d.0, &[0.5, 0.5, 0.0, 0.0, 0.0], 1e-8));
    }

    #[test]
    fn gate_examples() {
        assert_eq!(priority_gate(&NeedsVector::from_array([1.0; 5]), &[0.9; 5]), NeedLevel::SelfUpgrade);
        assert_eq!(
            priority_gate(&NeedsVector::new(0.1, 0.9, 0.9, 0.9, 0.9), &[0.3, 0.2, 0.0, 0.0, 0.0]),
            NeedLevel::Safety
        );
        assert_eq!(priority_gate(&NeedsVector::new(0.9, 0.2, 0.9, 0.9, 0.9), &[0.3; 5]), NeedLevel::Basic);
    }

    fn cfg_half() -> NeedsConfig {
        NeedsConfig { alpha: 1.0, move_cost: 0.5, ..NeedsConfig::default() }
    }

    #[test]
    fn utility_examples() {
        let ok = NeedsVector::from_array([1.0; 5]);
        let task = Task::new(0, Cell::new(4, 0), 10.0).requiring("rescue", 0.5);
        let weak = AgentState::new(0, Cell::new(0, 0), 10.0).with_skill("rescue", 0.2);
        assert_eq!(task_utility(&weak, &task, &ok, &cfg_half()), f64::NEG_INFINITY);

        let here = AgentState::new(0, Cell::new(4, 0), 10.0).with_skill("rescue", 1.0);
        assert_eq!(task_utility(&here, &task, &ok, &cfg_half()), 10.0);

        // match 0.5 over two required capabilities, four cells away
        let task2 = Task::new(1, Cell::new(4, 0), 10.0).requiring("a", 0.0).requiring("b", 0.0);
        let half = AgentState::new(1, Cell::new(0, 0), 10.0).with_skill("a", 1.0).with_skill("b", 0.0);
        assert!((task_utility(&half, &task2, &ok, &cfg_half()) - 3.0).abs() < 1e-12);

        let unsafe_nv = NeedsVector::new(0.0, 1.0, 1.0, 1.0, 1.0);
        assert_eq!(task_utility(&here, &task, &unsafe_nv, &cfg_half()), f64::NEG_INFINITY);
    }

    prop_compose! {
        fn needs()(a in prop::array::uniform5(0.0f64..=1.0)) -> NeedsVector { NeedsVector::from_array(a) }
    }

    proptest! {
        #[test]
        fn distribution_sums_to_one(nv in needs()) {
            let d = needs_distribution(&nv);
            prop_assert!((d.0.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(d.0.iter().all(|&p| p >= 0.0));
        }

        #[test]
        fn gate_is_monotone(nv in needs(), th in prop::array::uniform5(0.0f64..=1.0), i in 0usize..5, bump in 0.0f64..=1.0) {
            let before = priority_gate(&nv, &th);
            let mut a = nv.to_array();
            a[i] = (a[i] + bump).min(1.0);
            let after = priority_gate(&NeedsVector::from_array(a), &th);
            prop_assert!(after >= before);
        }

        #[test]
        fn evaluated_needs_are_valid(energy in 0.0f64..500.0, ax in 0i32..8, ay in 0i32..8, tx in 0i32..8, ty in 0i32..8) {
            let agent = AgentState::new(0, Cell::new(0, 0), energy).with_skill("s", 0.7);
            let mut obs = obs_empty();
            obs.visible_adversaries.push(AdversaryState { id: 0, pos: Cell::new(ax, ay), active: true });
            obs.visible_tasks.push(Task::new(0, Cell::new(tx, ty), 5.0).requiring("s", 0.5));
            let nv = evaluate_needs(&agent, &obs, &NeedsConfig::default(), 0.3).unwrap();
            prop_assert!(nv.is_valid());
        }

        #[test]
        fn utility_strictly_decreases_with_distance(d in 0i32..40, reward in 0.1f64..100.0) {
            let ok = NeedsVector::from_array([1.0; 5]);
            let task = Task::new(0, Cell::new(0, 0), reward);
            let near = AgentState::new(0, Cell::new(d, 0), 1.0);
            let far = AgentState::new(0, Cell::new(d + 1, 0), 1.0);
            prop_assert!(task_utility(&near, &task, &ok, &cfg_half()) > task_utility(&far, &task, &ok, &cfg_half()));
        }
    }
}
