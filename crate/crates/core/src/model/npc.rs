use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::tag::Tag;
use super::Violation;

pub const WEALTH: &str = "wealth";

/// Identity and local condition of one NPC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NpcProfile {
    pub id: String,
    /// Display name, e.g. "Merchant 1". Falls back to `id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub tags: BTreeSet<Tag>,
    /// The tag governed by the migration state machine.
    pub role_tag: Tag,
    #[serde(default)]
    pub personality: BTreeMap<String, f64>,
    #[serde(default)]
    pub needs: BTreeMap<String, f64>,
    #[serde(default)]
    pub local_state: BTreeMap<String, f64>,
}

impl NpcProfile {
    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.id)
    }

    pub fn wealth(&self) -> f64 {
        self.local_state.get(WEALTH).copied().unwrap_or(0.0)
    }

    pub fn trait_weight(&self, name: &str) -> f64 {
        self.personality.get(name).copied().unwrap_or(0.0)
    }

    pub fn need_level(&self, name: &str) -> f64 {
        self.needs.get(name).copied().unwrap_or(0.0)
    }

    /// Checks every profile invariant; an empty list means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.tags.is_empty() {
            out.push(Violation::new("tags", "must be non-empty"));
        }
        if !self.tags.contains(&self.role_tag) {
            out.push(Violation::new(
                "role_tag",
                format!("'{}' not in tags", self.role_tag),
            ));
        }
        for (name, w) in &self.personality {
            if !(-1.0..=1.0).contains(w) {
                out.push(Violation::new(
                    format!("personality.{name}"),
                    "out of [-1,1]",
                ));
            }
        }
        for (name, level) in &self.needs {
            if !(0.0..=1.0).contains(level) {
                out.push(Violation::new(format!("needs.{name}"), "out of [0,1]"));
            }
        }
        match self.local_state.get(WEALTH) {
            None => out.push(Violation::new("local_state.wealth", "required")),
            Some(w) if !(0.0..).contains(w) => {
                out.push(Violation::new("local_state.wealth", "must be >= 0"))
            }
            Some(_) => {}
        }
        out
    }
}
