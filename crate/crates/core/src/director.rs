//! Macro layer: narrative clock, rule evaluation and the causal critic.
//!
//! Within a tick the order is fixed: drift, active effects, rule evaluation,
//! critic review, then application of accepted events. Every function here
//! is a ledger-in, ledger-out transformation.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CascadeError, Result};
use crate::model::{
    ActiveEffect, ActiveEvent, EventVerdict, MacroEvent, MacroEventRule, WorldLedger,
};

/// Scheduled intensity change applied on ticks `start_tick..=end_tick`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftEntry {
    pub variable: String,
    pub delta_per_tick: f64,
    pub start_tick: u64,
    pub end_tick: u64,
    /// Half-width of uniform noise added to the delta. Zero consumes no randomness.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub noise: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl DriftEntry {
    pub fn covers(&self, tick: u64) -> bool {
        self.start_tick <= tick && tick <= self.end_tick
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DriftSchedule {
    pub entries: Vec<DriftEntry>,
}

/// Advances the ledger by one tick.
///
/// All deltas landing on a variable in this tick are summed before the
/// result is clamped to `[0, 1]`; a history entry is appended only when the
/// intensity actually changes. Spent events are dropped afterwards.
pub fn advance_clock<R: Rng + ?Sized>(
    mut ledger: WorldLedger,
    drifts: &DriftSchedule,
    rng: &mut R,
) -> WorldLedger {
    ledger.tick += 1;
    let tick = ledger.tick;

    let mut deltas: BTreeMap<String, f64> = BTreeMap::new();
    for drift in drifts.entries.iter().filter(|d| d.covers(tick)) {
        let mut delta = drift.delta_per_tick;
        if drift.noise > 0.0 {
            delta += rng.gen_range(-drift.noise..=drift.noise);
        }
        *deltas.entry(drift.variable.clone()).or_default() += delta;
    }
    for event in &mut ledger.active_events {
        for effect in event.effects.iter_mut().filter(|e| e.remaining_ticks > 0) {
            *deltas.entry(effect.variable.clone()).or_default() += effect.delta_per_tick;
            effect.remaining_ticks -= 1;
        }
    }
    for (name, delta) in deltas {
        if let Some(var) = ledger.variables.get_mut(&name) {
            let next = var.intensity + delta;
            var.set_intensity(tick, next);
        }
    }
    ledger.active_events.retain(|e| !e.is_spent());
    ledger
}

/// Returns candidates for every rule whose trigger holds, that is not
/// currently active, and whose last firing is more than `cooldown_ticks` ago.
/// Candidates are ordered by rule id.
pub fn evaluate_rules(ledger: &WorldLedger, rules: &[MacroEventRule]) -> Vec<MacroEvent> {
    let mut eligible: Vec<&MacroEventRule> = rules
        .iter()
        .filter(|rule| rule.trigger_holds(ledger))
        .filter(|rule| !ledger.is_active(&rule.id))
        .filter(|rule| match ledger.last_fired_tick(&rule.id) {
            Some(last) => ledger.tick - last > rule.cooldown_ticks,
            None => true,
        })
        .collect();
    eligible.sort_by(|a, b| a.id.cmp(&b.id));
    eligible
        .into_iter()
        .map(|rule| candidate_for(rule, ledger))
        .collect()
}

fn candidate_for(rule: &MacroEventRule, ledger: &WorldLedger) -> MacroEvent {
    let trigger_snapshot = rule
        .trigger
        .iter()
        .filter_map(|p| {
            ledger
                .intensity(&p.variable)
                .map(|i| (p.variable.clone(), i))
        })
        .collect();
    MacroEvent {
        rule_id: rule.id.clone(),
        instance_id: format!("{}@{}", rule.id, ledger.tick),
        name: rule.name.clone(),
        fired_tick: ledger.tick,
        trigger_snapshot,
        critic_verdict: EventVerdict::Pending,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticVerdict {
    pub accepted: bool,
    /// Empty iff accepted.
    pub reason: String,
    pub violated_requirement: Option<String>,
}

impl CriticVerdict {
    pub fn accept() -> Self {
        Self {
            accepted: true,
            reason: String::new(),
            violated_requirement: None,
        }
    }

    pub fn reject(reason: impl Into<String>, requirement: Option<String>) -> Self {
        Self {
            accepted: false,
            reason: reason.into(),
            violated_requirement: requirement,
        }
    }

    pub fn as_event_verdict(&self) -> EventVerdict {
        if self.accepted {
            EventVerdict::Accept
        } else {
            EventVerdict::Reject(self.reason.clone())
        }
    }
}

/// Accepts iff every consistency requirement holds; otherwise rejects with the
/// first violated requirement in declaration order.
pub fn critic_check(
    _candidate: &MacroEvent,
    rule: &MacroEventRule,
    ledger: &WorldLedger,
) -> CriticVerdict {
    for requirement in &rule.consistency_requirements {
        if let Some(reason) = requirement.violation(ledger) {
            return CriticVerdict::reject(reason, Some(requirement.to_string()));
        }
    }
    CriticVerdict::accept()
}

/// Registers an accepted event: logs it and starts its effects.
/// The tick is left unchanged.
pub fn apply_event(
    mut ledger: WorldLedger,
    event: &MacroEvent,
    rule: &MacroEventRule,
) -> Result<WorldLedger> {
    if !event.is_accepted() {
        return Err(CascadeError::Invariant(format!(
            "attempted to apply event {} with verdict {:?}",
            event.instance_id, event.critic_verdict
        )));
    }
    if event.rule_id != rule.id {
        return Err(CascadeError::Invariant(format!(
            "event {} does not belong to rule {}",
            event.instance_id, rule.id
        )));
    }
    if ledger
        .fired_log
        .iter()
        .any(|e| e.instance_id == event.instance_id)
    {
        return Err(CascadeError::Invariant(format!(
            "event {} applied twice",
            event.instance_id
        )));
    }
    ledger.fired_log.push(event.clone());
    ledger.active_events.push(ActiveEvent {
        instance_id: event.instance_id.clone(),
        rule_id: rule.id.clone(),
        name: rule.name.clone(),
        effects: rule.effects.iter().map(ActiveEffect::from).collect(),
    });
    Ok(ledger)
}

/// Extension point for replacing the declarative critic.
pub trait CausalCritic: Send + Sync {
    fn review(
        &self,
        candidate: &MacroEvent,
        rule: &MacroEventRule,
        ledger: &WorldLedger,
    ) -> CriticVerdict;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DeclarativeCritic;

impl CausalCritic for DeclarativeCritic {
    fn review(
        &self,
        candidate: &MacroEvent,
        rule: &MacroEventRule,
        ledger: &WorldLedger,
    ) -> CriticVerdict {
        critic_check(candidate, rule, ledger)
    }
}

/// Extension point for alternative macro reasoning. Implementations must be
/// deterministic for replay to hold.
pub trait MacroReasoner: Send + Sync {
    fn propose(&self, ledger: &WorldLedger, rules: &[MacroEventRule]) -> Vec<MacroEvent>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleReasoner;

impl MacroReasoner for RuleReasoner {
    fn propose(&self, ledger: &WorldLedger, rules: &[MacroEventRule]) -> Vec<MacroEvent> {
        evaluate_rules(ledger, rules)
    }
}
