//! Shared domain model used by every layer.

mod directive;
mod ledger;
mod npc;
mod rule;
mod tag;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use directive::{Directive, DirectivePacket, ParamValue, SelectorMode, TagSelector};
pub(crate) use ledger::clamp_unit;
pub use ledger::{
    ActiveEffect, ActiveEvent, CausalVariable, HistoryEntry, Level, LevelThresholds, Season,
    WorldLedger,
};
pub use npc::{NpcProfile, WEALTH};
pub use rule::{
    Comparator, EventEffect, EventVerdict, LedgerPredicate, MacroEvent, MacroEventRule, Threshold,
    VariablePredicate,
};
pub use tag::Tag;

/// One failed invariant, addressed by a field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Prefixes the path with a parent component.
    pub fn nested(mut self, parent: &str) -> Self {
        self.path = if self.path.is_empty() {
            parent.to_string()
        } else {
            format!("{parent}.{}", self.path)
        };
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}
