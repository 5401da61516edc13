//! Role-tag state machine with hysteresis.
//!
//! Each rule moves an NPC from one role tag to another when a local-state
//! predicate holds. When a rule is the reverse of another rule (`B -> A`
//! against `A -> B`), its threshold is pushed outward by the other rule's
//! margin and must be crossed strictly, which leaves a dead band between the
//! two thresholds.

use serde::{Deserialize, Serialize};

use crate::model::{Comparator, NpcProfile, Tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MigrationPredicate {
    pub field: String,
    pub cmp: Comparator,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagMigrationRule {
    pub from_tag: Tag,
    pub to_tag: Tag,
    pub predicate: MigrationPredicate,
    /// Defaults to 10% of the threshold magnitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hysteresis_margin: Option<f64>,
}

impl TagMigrationRule {
    pub fn margin(&self) -> f64 {
        self.hysteresis_margin
            .unwrap_or(0.1 * self.predicate.threshold.abs())
    }

    fn reverses(&self, other: &TagMigrationRule) -> bool {
        self.from_tag == other.to_tag && self.to_tag == other.from_tag
    }

    fn fires(&self, value: f64, rules: &[TagMigrationRule]) -> bool {
        let p = &self.predicate;
        let margin = rules
            .iter()
            .filter(|r| self.reverses(r))
            .map(TagMigrationRule::margin)
            .fold(0.0_f64, f64::max);
        if margin > 0.0 {
            if p.cmp.is_upward() {
                value > p.threshold + margin
            } else {
                value < p.threshold - margin
            }
        } else {
            p.cmp.holds(value, p.threshold)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagMigration {
    pub from_tag: Tag,
    pub to_tag: Tag,
    pub field: String,
    pub value: f64,
}

/// Fires at most one rule: the first, in declaration order, whose `from_tag`
/// is the NPC's role tag and whose predicate holds.
pub fn migrate_tags(
    mut npc: NpcProfile,
    rules: &[TagMigrationRule],
) -> (NpcProfile, Option<TagMigration>) {
    let fired = rules.iter().find_map(|rule| {
        if rule.from_tag != npc.role_tag {
            return None;
        }
        let value = *npc.local_state.get(&rule.predicate.field)?;
        rule.fires(value, rules).then_some((rule, value))
    });
    let Some((rule, value)) = fired else {
        return (npc, None);
    };
    npc.tags.remove(&rule.from_tag);
    npc.tags.insert(rule.to_tag.clone());
    npc.role_tag = rule.to_tag.clone();
    let migration = TagMigration {
        from_tag: rule.from_tag.clone(),
        to_tag: rule.to_tag.clone(),
        field: rule.predicate.field.clone(),
        value,
    };
    (npc, Some(migration))
}
