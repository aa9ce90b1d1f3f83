//! A small behavior-tree engine: selectors, sequences, conditions and actions.
//!
//! Leaves are named and resolved against a [`Registry`] at tick time. Ticks
//! are memory-less: anything that must persist between ticks lives on the
//! blackboard.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TickResult {
    Success,
    Failure,
    Running,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BTNode {
    Selector(Vec<BTNode>),
    Sequence(Vec<BTNode>),
    Condition(String),
    Action(String),
}

impl BTNode {
    pub fn condition(id: &str) -> Self {
        BTNode::Condition(id.to_string())
    }

    pub fn action(id: &str) -> Self {
        BTNode::Action(id.to_string())
    }

    /// Short label used in visit logs.
    pub fn label(&self) -> String {
        match self {
            BTNode::Selector(_) => "?".into(),
            BTNode::Sequence(_) => "->".into(),
            BTNode::Condition(id) | BTNode::Action(id) => id.clone(),
        }
    }

    /// Ids of every leaf, left to right.
    pub fn leaves(&self) -> Vec<&str> {
        match self {
            BTNode::Selector(c) | BTNode::Sequence(c) => c.iter().flat_map(|n| n.leaves()).collect(),
            BTNode::Condition(id) | BTNode::Action(id) => vec![id.as_str()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WiringError {
    #[error("no condition registered under `{0}`")]
    UnknownCondition(String),
    #[error("no action registered under `{0}`")]
    UnknownAction(String),
    #[error("composite node has no children")]
    EmptyComposite,
}

type ConditionFn<B> = Box<dyn Fn(&B) -> bool>;
type ActionFn<B> = Box<dyn Fn(&mut B) -> TickResult>;

/// Leaf tables for a blackboard type `B`.
pub struct Registry<B> {
    conditions: BTreeMap<String, ConditionFn<B>>,
    actions: BTreeMap<String, ActionFn<B>>,
}

impl<B> Default for Registry<B> {
    fn default() -> Self {
        Registry { conditions: BTreeMap::new(), actions: BTreeMap::new() }
    }
}

impl<B> Registry<B> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn condition(mut self, id: &str, f: impl Fn(&B) -> bool + 'static) -> Self {
        self.conditions.insert(id.into(), Box::new(f));
        self
    }

    pub fn action(mut self, id: &str, f: impl Fn(&mut B) -> TickResult + 'static) -> Self {
        self.actions.insert(id.into(), Box::new(f));
        self
    }

    /// Checks that every leaf of `tree` resolves.
    pub fn check(&self, tree: &BTNode) -> Result<(), WiringError> {
        match tree {
            BTNode::Selector(c) | BTNode::Sequence(c) => {
                if c.is_empty() {
                    return Err(WiringError::EmptyComposite);
                }
                c.iter().try_for_each(|n| self.check(n))
            }
            BTNode::Condition(id) if !self.conditions.contains_key(id) => Err(WiringError::UnknownCondition(id.clone())),
            BTNode::Action(id) if !self.actions.contains_key(id) => Err(WiringError::UnknownAction(id.clone())),
            _ => Ok(()),
        }
    }
}

/// Ticks `node` once against the blackboard.
pub fn tick<B>(node: &BTNode, registry: &Registry<B>, bb: &mut B) -> Result<TickResult, WiringError> {
    tick_inner(node, registry, bb, &mut None)
}

/// Like [`tick`], additionally appending the label of every node visited, in
/// visit order.
pub fn tick_logged<B>(
    node: &BTNode,
    registry: &Registry<B>,
    bb: &mut B,
    log: &mut Vec<String>,
) -> Result<TickResult, WiringError> {
    tick_inner(node, registry, bb, &mut Some(log))
}

fn tick_inner<B>(
    node: &BTNode,
    registry: &Registry<B>,
    bb: &mut B,
    log: &mut Option<&mut Vec<String>>,
) -> Result<TickResult, WiringError> {
    if let Some(log) = log.as_deref_mut() {
        log.push(node.label());
    }
    match node {
        BTNode::Selector(children) => {
            if children.is_empty() {
                return Err(WiringError::EmptyComposite);
            }
            for child in children {
                let r = tick_inner(child, registry, bb, log)?;
                if r != TickResult::Failure {
                    return Ok(r);
                }
            }
            Ok(TickResult::Failure)
        }
        BTNode::Sequence(children) => {
            if children.is_empty() {
                return Err(WiringError::EmptyComposite);
            }
            for child in children {
                let r = tick_inner(child, registry, bb, log)?;
                if r != TickResult::Success {
                    return Ok(r);
                }
            }
            Ok(TickResult::Success)
        }
        BTNode::Condition(id) => {
            let f = registry.conditions.get(id).ok_or_else(|| WiringError::UnknownCondition(id.clone()))?;
            Ok(if f(bb) { TickResult::Success } else { TickResult::Failure })
        }
        BTNode::Action(id) => {
            let f = registry.actions.get(id).ok_or_else(|| WiringError::UnknownAction(id.clone()))?;
            Ok(f(bb))
        }
    }
}

/// Leaf ids of the agent tree.
pub mod leaf {
    pub const PERCEIVE: &str = "Pe:update-observation-and-needs";
    pub const SAFE: &str = "Sa:safety-satisfied";
    pub const EVADE: &str = "Sa:evade";
    pub const BASIC_OK: &str = "BN:basic-satisfied";
    pub const RECHARGE: &str = "BN:recharge";
    pub const CAPABLE: &str = "Ca:capable-of-some-task";
    pub const UTILITY: &str = "U:compute-utilities";
    pub const PLAN: &str = "Pl:plan-atomic-ops";
    pub const NEGOTIATE: &str = "Ne:negotiate";
    pub const EXECUTE: &str = "A&E:execute-agreement";
}

/// The per-agent tree: perceive, stay safe, keep basic needs met, and only
/// then take part in cooperation.
pub fn build_sass_tree() -> BTNode {
    use leaf::*;
    BTNode::Sequence(vec![
        BTNode::action(PERCEIVE),
        BTNode::Selector(vec![BTNode::condition(SAFE), BTNode::action(EVADE)]),
        BTNode::Selector(vec![BTNode::condition(BASIC_OK), BTNode::action(RECHARGE)]),
        BTNode::Sequence(vec![
            BTNode::condition(CAPABLE),
            BTNode::action(UTILITY),
            BTNode::action(PLAN),
            BTNode::action(NEGOTIATE),
            BTNode::action(EXECUTE),
        ]),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Bb {
        seen: Vec<&'static str>,
    }

    fn fixed(r: TickResult, name: &'static str) -> impl Fn(&mut Bb) -> TickResult {
        move |bb: &mut Bb| {
            bb.seen.push(name);
            r
        }
    }

    fn registry() -> Registry<Bb> {
        Registry::new()
            .action("ok", fixed(TickResult::Success, "ok"))
            .action("ok2", fixed(TickResult::Success, "ok2"))
            .action("fail", fixed(TickResult::Failure, "fail"))
            .action("run", fixed(TickResult::Running, "run"))
            .condition("yes", |_| true)
    }

    #[test]
    fn selector_returns_first_non_failure() {
        let t = BTNode::Selector(vec![BTNode::action("fail"), BTNode::action("ok"), BTNode::action("ok2")]);
        let mut bb = Bb { seen: vec![] };
        assert_eq!(tick(&t, &registry(), &mut bb), Ok(TickResult::Success));
        assert_eq!(bb.seen, ["fail", "ok"]);
    }

    #[test]
    fn sequence_stops_at_first_failure() {
        let t = BTNode::Sequence(vec![BTNode::action("ok"), BTNode::action("fail"), BTNode::action("ok2")]);
        let mut bb = Bb { seen: vec![] };
        let mut log = Vec::new();
        assert_eq!(tick_logged(&t, &registry(), &mut bb, &mut log), Ok(TickResult::Failure));
        assert_eq!(log, ["->", "ok", "fail"]);
        assert!(!bb.seen.contains(&"ok2"));
    }

    #[test]
    fn running_propagates_through_sequence() {
        let t = BTNode::Sequence(vec![BTNode::action("ok"), BTNode::action("run")]);
        let mut bb = Bb { seen: vec![] };
        assert_eq!(tick(&t, &registry(), &mut bb), Ok(TickResult::Running));
    }

    #[test]
    fn unresolvable_leaf_is_a_wiring_error() {
        let t = BTNode::Sequence(vec![BTNode::condition("yes"), BTNode::action("missing")]);
        let mut bb = Bb { seen: vec![] };
        assert_eq!(tick(&t, &registry(), &mut bb), Err(WiringError::UnknownAction("missing".into())));
        assert_eq!(registry().check(&t), Err(WiringError::UnknownAction("missing".into())));
    }

    #[test]
    fn sass_tree_has_expected_leaves() {
        let t = build_sass_tree();
        assert_eq!(
            t.leaves(),
            [
                leaf::PERCEIVE,
                leaf::SAFE,
                leaf::EVADE,
                leaf::BASIC_OK,
                leaf::RECHARGE,
                leaf::CAPABLE,
                leaf::UTILITY,
                leaf::PLAN,
                leaf::NEGOTIATE,
                leaf::EXECUTE
            ]
        );
    }
}
