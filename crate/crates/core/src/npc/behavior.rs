//! Minimal behaviour trees used when an NPC accepts no directive.

use serde::{Deserialize, Serialize};

use super::ActionCatalog;
use crate::model::{Comparator, NpcProfile, Tag, VariablePredicate, Violation, WorldLedger};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericCondition {
    pub name: String,
    pub cmp: Comparator,
    pub value: f64,
}

/// Predicate over the NPC and the world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NpcCondition {
    Need(NumericCondition),
    Local(NumericCondition),
    Trait(NumericCondition),
    HasTag(Tag),
    Variable(VariablePredicate),
}

impl NpcCondition {
    pub fn holds(&self, npc: &NpcProfile, ledger: &WorldLedger) -> bool {
        match self {
            NpcCondition::Need(c) => c.cmp.holds(npc.need_level(&c.name), c.value),
            NpcCondition::Local(c) => match npc.local_state.get(&c.name) {
                Some(v) => c.cmp.holds(*v, c.value),
                None => false,
            },
            NpcCondition::Trait(c) => c.cmp.holds(npc.trait_weight(&c.name), c.value),
            NpcCondition::HasTag(t) => npc.tags.contains(t),
            NpcCondition::Variable(p) => p.holds(ledger),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BtNode {
    /// Succeeds with the first child that succeeds.
    Selector(Vec<BtNode>),
    /// Succeeds if every child succeeds, in order.
    Sequence(Vec<BtNode>),
    Condition(NpcCondition),
    Action(String),
}

enum Status<'a> {
    Failure,
    Success(Option<&'a str>),
}

impl BtNode {
    fn tick<'a>(&'a self, npc: &NpcProfile, ledger: &WorldLedger) -> Status<'a> {
        match self {
            BtNode::Action(id) => Status::Success(Some(id)),
            BtNode::Condition(c) => {
                if c.holds(npc, ledger) {
                    Status::Success(None)
                } else {
                    Status::Failure
                }
            }
            BtNode::Selector(children) => {
                for child in children {
                    if let s @ Status::Success(_) = child.tick(npc, ledger) {
                        return s;
                    }
                }
                Status::Failure
            }
            BtNode::Sequence(children) => {
                let mut chosen = None;
                for child in children {
                    match child.tick(npc, ledger) {
                        Status::Failure => return Status::Failure,
                        Status::Success(a) => chosen = chosen.or(a),
                    }
                }
                Status::Success(chosen)
            }
        }
    }

    /// Action chosen when every condition is false. Selector and Sequence are
    /// monotone in their conditions, so a tree that yields here yields always.
    fn fallback(&self) -> Option<&str> {
        match self {
            BtNode::Action(id) => Some(id),
            BtNode::Condition(_) => None,
            BtNode::Selector(children) => children.iter().find_map(BtNode::fallback),
            BtNode::Sequence(children) => {
                let mut first = None;
                for child in children {
                    let a = child.fallback()?;
                    first = first.or(Some(a));
                }
                first
            }
        }
    }

    /// True when every successful evaluation carries an action.
    fn always_yields_action(&self) -> bool {
        match self {
            BtNode::Action(_) => true,
            BtNode::Condition(_) => false,
            BtNode::Selector(children) => children.iter().all(BtNode::always_yields_action),
            BtNode::Sequence(children) => children.iter().any(BtNode::always_yields_action),
        }
    }

    fn collect_actions<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            BtNode::Action(id) => out.push(id),
            BtNode::Condition(_) => {}
            BtNode::Selector(c) | BtNode::Sequence(c) => {
                c.iter().for_each(|n| n.collect_actions(out))
            }
        }
    }

    fn collect_variables<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            BtNode::Condition(NpcCondition::Variable(p)) => out.push(&p.variable),
            BtNode::Selector(c) | BtNode::Sequence(c) => {
                c.iter().for_each(|n| n.collect_variables(out))
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BehaviorTree {
    pub root: BtNode,
}

impl BehaviorTree {
    pub fn new(root: BtNode) -> Self {
        Self { root }
    }

    pub fn idle() -> Self {
        Self::new(BtNode::Action("idle".into()))
    }

    pub fn evaluate(&self, npc: &NpcProfile, ledger: &WorldLedger) -> Option<&str> {
        match self.root.tick(npc, ledger) {
            Status::Success(action) => action,
            Status::Failure => None,
        }
    }

    pub fn actions(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.root.collect_actions(&mut out);
        out
    }

    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.root.collect_variables(&mut out);
        out
    }

    /// Every leaf must be cataloged and the tree must always end in an
    /// action, with a `default` action on the all-conditions-false path.
    pub fn validate(&self, catalog: &ActionCatalog) -> Vec<Violation> {
        let mut out = Vec::new();
        for id in self.actions() {
            if !catalog.contains(id) {
                out.push(Violation::new("", format!("unknown action '{id}'")));
            }
        }
        if !self.root.always_yields_action() {
            out.push(Violation::new(
                "",
                "a successful path ends without an action",
            ));
        }
        match self.root.fallback() {
            None => out.push(Violation::new("", "no reachable default action")),
            Some(id) => {
                if catalog.get(id).is_some_and(|a| !a.default) {
                    out.push(Violation::new(
                        "",
                        format!("fallback action '{id}' is not marked default"),
                    ));
                }
            }
        }
        out
    }
}
