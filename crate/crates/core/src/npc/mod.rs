//! Tag-driven NPC runtime: utility scoring, behaviour-tree fallback, action
//! execution, role-tag migration and the read-only dialogue channel.

mod behavior;
mod dialogue;
mod migration;
mod utility;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{clamp_unit, NpcProfile, WEALTH};

pub use behavior::{BehaviorTree, BtNode, NpcCondition, NumericCondition};
pub use dialogue::{
    request_dialogue, DialogueError, DialogueProvider, DialogueSnapshot, LlmCallCounter,
    StubDialogueProvider,
};
pub use migration::{migrate_tags, MigrationPredicate, TagMigration, TagMigrationRule};
pub use utility::{score_directive, select_action, Selection, UtilityBreakdown, UtilityWeights};

/// What an action id means for the NPC that performs it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionBinding {
    pub action_id: String,
    /// trait name -> +1 (attracts) or -1 (repels).
    #[serde(default)]
    pub required_trait_affinities: BTreeMap<String, i8>,
    /// need name -> relief in `[0, 1]`.
    #[serde(default)]
    pub satisfies_needs: BTreeMap<String, f64>,
    #[serde(default)]
    pub local_effects: BTreeMap<String, f64>,
    #[serde(default)]
    pub default: bool,
}

impl ActionBinding {
    pub fn idle() -> Self {
        Self {
            action_id: "idle".into(),
            required_trait_affinities: BTreeMap::new(),
            satisfies_needs: BTreeMap::new(),
            local_effects: BTreeMap::new(),
            default: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionCatalog {
    actions: BTreeMap<String, ActionBinding>,
}

impl ActionCatalog {
    /// Later duplicates replace earlier ones; scenario validation rejects them first.
    pub fn new(actions: impl IntoIterator<Item = ActionBinding>) -> Self {
        Self {
            actions: actions
                .into_iter()
                .map(|a| (a.action_id.clone(), a))
                .collect(),
        }
    }

    pub fn get(&self, action_id: &str) -> Option<&ActionBinding> {
        self.actions.get(action_id)
    }

    pub fn contains(&self, action_id: &str) -> bool {
        self.actions.contains_key(action_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ActionBinding> {
        self.actions.values()
    }
}

/// Local state before and after an action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionOutcome {
    pub local_before: BTreeMap<String, f64>,
    pub local_after: BTreeMap<String, f64>,
}

impl ActionOutcome {
    /// Per-field change, omitting untouched fields.
    pub fn delta(&self) -> BTreeMap<String, f64> {
        self.local_after
            .iter()
            .filter_map(|(k, after)| {
                let before = self.local_before.get(k).copied().unwrap_or(0.0);
                (after != &before).then(|| (k.clone(), after - before))
            })
            .collect()
    }
}

/// Applies an action's local effects (wealth floored at 0) and need relief
/// (needs clamped to `[0, 1]`).
pub fn execute_action(mut npc: NpcProfile, action: &ActionBinding) -> (NpcProfile, ActionOutcome) {
    let local_before = npc.local_state.clone();
    for (field, delta) in &action.local_effects {
        let value = npc.local_state.entry(field.clone()).or_insert(0.0);
        *value += delta;
        if field == WEALTH && *value < 0.0 {
            *value = 0.0;
        }
    }
    for (need, relief) in &action.satisfies_needs {
        if let Some(level) = npc.needs.get_mut(need) {
            *level = clamp_unit(*level - relief);
        }
    }
    let outcome = ActionOutcome {
        local_before,
        local_after: npc.local_state.clone(),
    };
    (npc, outcome)
}
