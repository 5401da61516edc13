//! Group-level directives and the tag selectors that address them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::tag::Tag;
use super::Violation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectorMode {
    Any,
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagSelector {
    pub mode: SelectorMode,
    pub tags: BTreeSet<Tag>,
}

impl TagSelector {
    pub fn any(tags: impl IntoIterator<Item = Tag>) -> Self {
        Self {
            mode: SelectorMode::Any,
            tags: tags.into_iter().collect(),
        }
    }

    pub fn all(tags: impl IntoIterator<Item = Tag>) -> Self {
        Self {
            mode: SelectorMode::All,
            tags: tags.into_iter().collect(),
        }
    }

    /// `Any`: non-empty intersection. `All`: selector tags are a subset.
    pub fn matches(&self, npc_tags: &BTreeSet<Tag>) -> bool {
        match self.mode {
            SelectorMode::Any => self.tags.iter().any(|t| npc_tags.contains(t)),
            SelectorMode::All => self.tags.is_subset(npc_tags),
        }
    }
}

impl fmt::Display for TagSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tags: Vec<&str> = self.tags.iter().map(Tag::as_str).collect();
        write!(f, "{:?}{{{}}}", self.mode, tags.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(n) => write!(f, "{n}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

/// A compiled instruction for every NPC whose tags satisfy `selector`.
///
/// Serializes as a flat single-line JSON packet (see [`DirectivePacket`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DirectivePacket", from = "DirectivePacket")]
pub struct Directive {
    pub id: String,
    pub source_module: String,
    pub cause_event: String,
    pub selector: TagSelector,
    pub action_id: String,
    pub parameters: BTreeMap<String, ParamValue>,
    pub base_priority: f64,
    pub risk: f64,
    pub issued_tick: u64,
    pub ttl_ticks: u64,
}

impl Directive {
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.selector.tags.is_empty() {
            out.push(Violation::new("selector_tags", "must be non-empty"));
        }
        if !(0.0..=1.0).contains(&self.base_priority) {
            out.push(Violation::new("base_priority", "out of [0,1]"));
        }
        if !(0.0..=1.0).contains(&self.risk) {
            out.push(Violation::new("risk", "out of [0,1]"));
        }
        if self.ttl_ticks < 1 {
            out.push(Violation::new("ttl_ticks", "must be >= 1"));
        }
        out
    }

    /// Live while `issued_tick + ttl_ticks > tick`.
    pub fn is_live_at(&self, tick: u64) -> bool {
        self.issued_tick + self.ttl_ticks > tick
    }
}

/// Wire form of a [`Directive`]. Field order is the packet layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectivePacket {
    pub id: String,
    pub source_module: String,
    pub cause_event: String,
    pub selector_mode: SelectorMode,
    pub selector_tags: BTreeSet<Tag>,
    pub action_id: String,
    pub parameters: BTreeMap<String, ParamValue>,
    pub base_priority: f64,
    pub risk: f64,
    pub issued_tick: u64,
    pub ttl_ticks: u64,
}

impl From<Directive> for DirectivePacket {
    fn from(d: Directive) -> Self {
        Self {
            id: d.id,
            source_module: d.source_module,
            cause_event: d.cause_event,
            selector_mode: d.selector.mode,
            selector_tags: d.selector.tags,
            action_id: d.action_id,
            parameters: d.parameters,
            base_priority: d.base_priority,
            risk: d.risk,
            issued_tick: d.issued_tick,
            ttl_ticks: d.ttl_ticks,
        }
    }
}

impl From<DirectivePacket> for Directive {
    fn from(p: DirectivePacket) -> Self {
        Self {
            id: p.id,
            source_module: p.source_module,
            cause_event: p.cause_event,
            selector: TagSelector {
                mode: p.selector_mode,
                tags: p.selector_tags,
            },
            action_id: p.action_id,
            parameters: p.parameters,
            base_priority: p.base_priority,
            risk: p.risk,
            issued_tick: p.issued_tick,
            ttl_ticks: p.ttl_ticks,
        }
    }
}
