//! Coordination hub: sparse module activation, directive compilation and
//! tag-routed delivery.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CascadeError, Result};
use crate::model::{
    Directive, LedgerPredicate, MacroEvent, NpcProfile, ParamValue, TagSelector, VariablePredicate,
    WorldLedger,
};

/// One activation clause. Present fields are conjoined; a module activates
/// when any of its matchers holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationMatcher {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<VariablePredicate>,
}

impl ActivationMatcher {
    pub fn is_empty(&self) -> bool {
        self.rule_id.is_none() && self.variable.is_none()
    }

    pub fn matches(&self, event: &MacroEvent, ledger: &WorldLedger) -> bool {
        if self.is_empty() {
            return false;
        }
        let rule_ok = self.rule_id.as_ref().is_none_or(|id| *id == event.rule_id);
        let var_ok = self.variable.as_ref().is_none_or(|p| p.holds(ledger));
        rule_ok && var_ok
    }
}

/// Parameter value in a template: a constant, or `intensity * scale + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamExpr {
    Number(f64),
    Text(String),
    Affine(AffineExpr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineExpr {
    pub variable: String,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
}

fn one() -> f64 {
    1.0
}

impl ParamExpr {
    pub fn evaluate(&self, ledger: &WorldLedger) -> Option<ParamValue> {
        match self {
            ParamExpr::Number(n) => Some(ParamValue::Number(*n)),
            ParamExpr::Text(s) => Some(ParamValue::Text(s.clone())),
            ParamExpr::Affine(a) => ledger
                .intensity(&a.variable)
                .map(|i| ParamValue::Number(i * a.scale + a.offset)),
        }
    }

    pub fn variable(&self) -> Option<&str> {
        match self {
            ParamExpr::Affine(a) => Some(&a.variable),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectiveTemplate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<LedgerPredicate>,
    pub tag_selector: TagSelector,
    pub action_id: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, ParamExpr>,
    pub base_priority: f64,
    pub risk: f64,
    pub ttl_ticks: u64,
}

/// A declarative domain module (economy, security, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainModuleSpec {
    pub id: String,
    pub activation: Vec<ActivationMatcher>,
    #[serde(default)]
    pub compile_rules: Vec<DirectiveTemplate>,
}

impl DomainModuleSpec {
    pub fn activates(&self, event: &MacroEvent, ledger: &WorldLedger) -> bool {
        self.activation.iter().any(|m| m.matches(event, ledger))
    }
}

/// Modules activated by `event`, in declaration order.
pub fn route_activation<'a>(
    event: &MacroEvent,
    ledger: &WorldLedger,
    modules: &'a [DomainModuleSpec],
) -> Vec<&'a DomainModuleSpec> {
    modules
        .iter()
        .filter(|m| m.activates(event, ledger))
        .collect()
}

/// Monotonic directive id counter. Ids are zero-padded so lexicographic
/// order equals issue order.
#[derive(Debug, Clone, Default)]
pub struct DirectiveIdSource {
    issued: u64,
}

impl DirectiveIdSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_id(&mut self) -> String {
        self.issued += 1;
        format!("D{:08}", self.issued)
    }

    pub fn issued(&self) -> u64 {
        self.issued
    }
}

/// Compiles one directive per template whose condition holds, drawing ids in
/// template order.
pub fn compile_directives(
    module: &DomainModuleSpec,
    event: &MacroEvent,
    ledger: &WorldLedger,
    ids: &mut DirectiveIdSource,
) -> Result<Vec<Directive>> {
    let mut out = Vec::new();
    for template in &module.compile_rules {
        if let Some(cond) = &template.condition {
            if !cond.holds(ledger) {
                continue;
            }
        }
        let mut parameters = BTreeMap::new();
        for (name, expr) in &template.parameters {
            let value = expr.evaluate(ledger).ok_or_else(|| {
                CascadeError::Invariant(format!(
                    "module {} parameter {name} references unknown variable",
                    module.id
                ))
            })?;
            parameters.insert(name.clone(), value);
        }
        out.push(Directive {
            id: ids.next_id(),
            source_module: module.id.clone(),
            cause_event: event.instance_id.clone(),
            selector: template.tag_selector.clone(),
            action_id: template.action_id.clone(),
            parameters,
            base_priority: template.base_priority,
            risk: template.risk,
            issued_tick: ledger.tick,
            ttl_ticks: template.ttl_ticks,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub directive_id: String,
    /// Sorted by NPC id.
    pub matched_npc_ids: Vec<String>,
    pub tick: u64,
}

/// Resolves each directive's selector against the roster.
pub fn broadcast(directives: &[Directive], npcs: &[NpcProfile]) -> Vec<DeliveryRecord> {
    directives
        .iter()
        .map(|d| {
            let mut matched: Vec<String> = npcs
                .iter()
                .filter(|n| d.selector.matches(&n.tags))
                .map(|n| n.id.clone())
                .collect();
            matched.sort();
            DeliveryRecord {
                directive_id: d.id.clone(),
                matched_npc_ids: matched,
                tick: d.issued_tick,
            }
        })
        .collect()
}

pub fn expire_directives(active: Vec<Directive>, tick: u64) -> Vec<Directive> {
    active.into_iter().filter(|d| d.is_live_at(tick)).collect()
}
