//! Beta-Bernoulli learning of GUT outcome probabilities, reach-based pruning
//! and the episodic adaptation loop.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::gut::{GutError, GutNode, Matrix, PayoffFn, Features};
use crate::mission::{run_with, MissionError, RunOptions};
use crate::scenario::Scenario;
use crate::trace::EventKind;

/// A payoff cell of a GUT node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub node: String,
    pub row: usize,
    pub col: usize,
}

impl CellKey {
    pub fn new(node: &str, row: usize, col: usize) -> Self {
        CellKey { node: node.to_string(), row, col }
    }
}

/// Beta counts: successes + 1 and failures + 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BetaCounts {
    pub alpha: u64,
    pub beta: u64,
}

impl Default for BetaCounts {
    fn default() -> Self {
        BetaCounts { alpha: 1, beta: 1 }
    }
}

impl BetaCounts {
    pub fn mean(self) -> f64 {
        self.alpha as f64 / (self.alpha + self.beta) as f64
    }

    pub fn variance(self) -> f64 {
        let (a, b) = (self.alpha as f64, self.beta as f64);
        let s = a + b;
        a * b / (s * s * (s + 1.0))
    }
}

/// Variance of the uniform prior Beta(1, 1).
pub const PRIOR_VARIANCE: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomePosterior {
    pub cells: BTreeMap<CellKey, BetaCounts>,
}

impl OutcomePosterior {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &CellKey) -> BetaCounts {
        self.cells.get(key).copied().unwrap_or_default()
    }

    pub fn mean(&self, key: &CellKey) -> f64 {
        self.get(key).mean()
    }

    pub fn update(&mut self, key: CellKey, success: bool) {
        let c = self.cells.entry(key).or_default();
        if success {
            c.alpha += 1;
        } else {
            c.beta += 1;
        }
    }

    /// Mean posterior variance over every payoff cell of the tree.
    pub fn mean_variance(&self, gut: &GutNode) -> f64 {
        let keys = cell_keys(gut);
        if keys.is_empty() {
            return PRIOR_VARIANCE;
        }
        keys.iter().map(|k| self.get(k).variance()).sum::<f64>() / keys.len() as f64
    }
}

/// Returns the posterior with one more observation at `key`.
pub fn update_posterior(post: &OutcomePosterior, key: CellKey, success: bool) -> OutcomePosterior {
    let mut next = post.clone();
    next.update(key, success);
    next
}

pub fn cell_keys(gut: &GutNode) -> Vec<CellKey> {
    gut.nodes()
        .into_iter()
        .flat_map(|n| {
            (0..n.rows.len()).flat_map(move |r| (0..n.cols.len()).map(move |c| CellKey::new(&n.id, r, c)))
        })
        .collect()
}

/// Rewrites every payoff entry as `mean * win + (1 - mean) * loss`.
pub fn posterior_payoff(gut: &GutNode, post: &OutcomePosterior, win_value: f64, loss_value: f64) -> GutNode {
    gut.map_payoffs(&mut |n: &GutNode| {
        let mut m = Matrix::filled(n.rows.len(), n.cols.len(), 0.0);
        for r in 0..n.rows.len() {
            for c in 0..n.cols.len() {
                let mean = post.mean(&CellKey::new(&n.id, r, c));
                m.set(r, c, mean * win_value + (1.0 - mean) * loss_value);
            }
        }
        PayoffFn::constant(m)
    })
}

/// Removes every child whose equilibrium reach probability is below
/// `eps_reach`. Reach multiplies the row and column probabilities of the
/// joint strategy leading to the child along the path from the root.
pub fn prune(gut: &GutNode, state: &Features, eps_reach: f64) -> Result<GutNode, GutError> {
    prune_from(gut, state, eps_reach, 1.0)
}

fn prune_from(node: &GutNode, state: &Features, eps: f64, reach: f64) -> Result<GutNode, GutError> {
    let mut out = GutNode { children: BTreeMap::new(), ..node.clone() };
    if node.children.is_empty() {
        return Ok(out);
    }
    let eq = node.solve(state)?;
    for (&(r, c), child) in &node.children {
        let child_reach = reach * eq.row[r] * eq.col[c];
        if child_reach >= eps {
            out.children.insert((r, c), prune_from(child, state, eps, child_reach)?);
        }
    }
    Ok(out)
}

/// Self-upgrade need score: 1 minus mean posterior variance relative to the
/// uniform prior, clamped to [0, 1].
pub fn self_upgrade_score(post: &OutcomePosterior, gut: &GutNode) -> f64 {
    let keys = cell_keys(gut);
    if keys.is_empty() {
        return 0.0;
    }
    let relative = keys.iter().map(|k| post.get(k).variance() / PRIOR_VARIANCE).sum::<f64>() / keys.len() as f64;
    (1.0 - relative).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub success: bool,
    pub cost: f64,
    pub value: f64,
    pub mean_variance: f64,
    pub means: BTreeMap<String, f64>,
}

pub type LearningCurve = Vec<CurvePoint>;

#[derive(Debug, Clone, PartialEq)]
pub struct Adaptation {
    pub curve: LearningCurve,
    pub posterior: OutcomePosterior,
}

/// Per-episode seed derived from the loop seed.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(episode as u64)
}

/// Runs `episodes` Explore missions. Before each one the decision tree is
/// rebuilt from the current posterior (substitute, then prune); afterwards
/// every encounter draw in the trace updates the posterior.
pub fn adapt_loop(scenario: &Scenario, episodes: usize, seed: u64) -> Result<Adaptation, MissionError> {
    let gut = scenario.gut.as_ref().ok_or(MissionError::MissingGut)?;
    let mut post = OutcomePosterior::new();
    let mut curve = Vec::with_capacity(episodes);
    let keys = cell_keys(&gut.root);
    for episode in 0..episodes {
        let substituted = posterior_payoff(&gut.root, &post, gut.win_value, gut.loss_value);
        let tree = prune(&substituted, &Features::new(), scenario.learning.eps_reach)?;
        let value = tree.solve(&Features::new())?.value;

        let mut sc = scenario.clone();
        // Pruned nodes are unreachable, so their hidden outcomes are dropped.
        let hidden = gut.hidden.iter().filter(|(k, _)| tree.find(&k.node).is_some()).map(|(k, &p)| (k.clone(), p)).collect();
        sc.gut = Some(crate::scenario::GutSpec { root: tree, hidden, ..gut.clone() });
        let opts = RunOptions { self_upgrade: self_upgrade_score(&post, &gut.root), ..RunOptions::default() };
        let report = run_with(&sc, episode_seed(seed, episode), &opts)?;

        let mut success = false;
        let mut cost = 0.0;
        for e in &report.trace.events {
            match &e.event {
                EventKind::Encounter { draws, .. } => {
                    for d in draws {
                        post.update(CellKey::new(&d.node, d.row, d.col), d.success);
                    }
                }
                EventKind::EpisodeEnd { success: s, cost: c } => {
                    success = *s;
                    cost = *c;
                }
                _ => {}
            }
        }
        let means = keys
            .iter()
            .map(|k| (alloc::format!("{}[{},{}]", k.node, k.row, k.col), post.mean(k)))
            .collect();
        curve.push(CurvePoint { episode, success, cost, value, mean_variance: post.mean_variance(&gut.root), means });
    }
    Ok(Adaptation { curve, posterior: post })
}
