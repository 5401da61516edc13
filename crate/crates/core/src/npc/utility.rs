//! Local utility calculus.
//!
//! ```text
//! U = w_base * base + w_trait * trait_alignment + w_need * need_relief - w_risk * risk
//! accept iff U >= threshold
//! ```

use serde::{Deserialize, Serialize};

use super::behavior::BehaviorTree;
use super::ActionBinding;
use crate::model::{Directive, NpcProfile, WorldLedger};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityWeights {
    pub w_base: f64,
    pub w_trait: f64,
    pub w_need: f64,
    pub w_risk: f64,
    pub threshold: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self {
            w_base: 1.0,
            w_trait: 1.0,
            w_need: 1.0,
            w_risk: 1.0,
            threshold: 0.5,
        }
    }
}

impl UtilityWeights {
    pub fn is_well_formed(&self) -> bool {
        [self.w_base, self.w_trait, self.w_need, self.w_risk]
            .iter()
            .all(|w| *w >= 0.0)
            && self.threshold.is_finite()
    }

    /// The single place the weighted sum is formed. Operand order is fixed so
    /// stored breakdowns recompute bit-for-bit.
    pub fn combine(&self, base: f64, trait_term: f64, need: f64, risk: f64) -> f64 {
        self.w_base * base + self.w_trait * trait_term + self.w_need * need - self.w_risk * risk
    }
}

/// A scored directive as recorded in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityBreakdown {
    #[serde(rename = "npc")]
    pub npc_id: String,
    pub directive_id: String,
    pub action_id: String,
    pub base_term: f64,
    pub trait_term: f64,
    pub need_term: f64,
    pub risk_term: f64,
    pub total: f64,
    pub threshold: f64,
    pub accepted: bool,
}

impl UtilityBreakdown {
    /// Total recomputed from the stored terms.
    pub fn recompute(&self, weights: &UtilityWeights) -> f64 {
        weights.combine(
            self.base_term,
            self.trait_term,
            self.need_term,
            self.risk_term,
        )
    }
}

pub fn score_directive(
    npc: &NpcProfile,
    directive: &Directive,
    binding: &ActionBinding,
    weights: &UtilityWeights,
) -> UtilityBreakdown {
    let trait_sum: f64 = binding
        .required_trait_affinities
        .iter()
        .map(|(name, sign)| f64::from(*sign) * npc.trait_weight(name))
        .sum();
    let need_sum: f64 = binding
        .satisfies_needs
        .iter()
        .map(|(name, relief)| relief * npc.need_level(name))
        .sum();
    let base_term = directive.base_priority;
    let trait_term = trait_sum.clamp(-1.0, 1.0);
    let need_term = need_sum.clamp(0.0, 1.0);
    let risk_term = directive.risk;
    let total = weights.combine(base_term, trait_term, need_term, risk_term);
    UtilityBreakdown {
        npc_id: npc.id.clone(),
        directive_id: directive.id.clone(),
        action_id: directive.action_id.clone(),
        base_term,
        trait_term,
        need_term,
        risk_term,
        total,
        threshold: weights.threshold,
        accepted: total >= weights.threshold,
    }
}

/// The action an NPC performs this tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub action_id: String,
    /// Directive that won, or `None` when the behaviour tree chose.
    pub directive_id: Option<String>,
}

/// Highest accepted total wins, ties going to the smaller directive id.
/// With nothing accepted the behaviour tree decides.
///
/// Returns `None` only for a tree that fails to produce an action, which
/// scenario validation rules out.
pub fn select_action(
    npc: &NpcProfile,
    accepted: &[UtilityBreakdown],
    tree: &BehaviorTree,
    ledger: &WorldLedger,
) -> Option<Selection> {
    let best = accepted.iter().filter(|b| b.accepted).max_by(|a, b| {
        a.total
            .total_cmp(&b.total)
            .then_with(|| b.directive_id.cmp(&a.directive_id))
    });
    match best {
        Some(b) => Some(Selection {
            action_id: b.action_id.clone(),
            directive_id: Some(b.directive_id.clone()),
        }),
        None => tree.evaluate(npc, ledger).map(|action_id| Selection {
            action_id: action_id.to_string(),
            directive_id: None,
        }),
    }
}
