//! Macro event rules and the predicates they are built from.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ledger::{Level, Season, WorldLedger};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">=", alias = "≥")]
    Ge,
    #[serde(rename = "<=", alias = "≤")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<")]
    Lt,
}

impl Comparator {
    pub fn holds<T: PartialOrd>(self, lhs: T, rhs: T) -> bool {
        match self {
            Comparator::Ge => lhs >= rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Lt => lhs < rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Lt => "<",
        }
    }

    /// True for `>=` and `>`.
    pub fn is_upward(self) -> bool {
        matches!(self, Comparator::Ge | Comparator::Gt)
    }
}

/// Right-hand side of a variable comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Level(Level),
    Intensity(f64),
}

/// `variable <cmp> threshold`, evaluated against the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariablePredicate {
    pub variable: String,
    pub cmp: Comparator,
    pub threshold: Threshold,
}

impl VariablePredicate {
    pub fn new(variable: impl Into<String>, cmp: Comparator, threshold: Threshold) -> Self {
        Self {
            variable: variable.into(),
            cmp,
            threshold,
        }
    }

    /// Unknown variables never satisfy a predicate.
    pub fn holds(&self, ledger: &WorldLedger) -> bool {
        match ledger.intensity(&self.variable) {
            Some(intensity) => self.holds_for(intensity, ledger),
            None => false,
        }
    }

    /// Evaluates against an explicit intensity using the ledger's thresholds.
    pub fn holds_for(&self, intensity: f64, ledger: &WorldLedger) -> bool {
        match self.threshold {
            Threshold::Level(level) => self.cmp.holds(ledger.thresholds.level_of(intensity), level),
            Threshold::Intensity(value) => self.cmp.holds(intensity, value),
        }
    }
}

impl fmt::Display for VariablePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.threshold {
            Threshold::Level(level) => {
                write!(f, "{} {} {:?}", self.variable, self.cmp.symbol(), level)
            }
            Threshold::Intensity(v) => write!(f, "{} {} {}", self.variable, self.cmp.symbol(), v),
        }
    }
}

/// A consistency requirement checked by the causal critic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerPredicate {
    SeasonIs(Season),
    SeasonNot(Season),
    Variable(VariablePredicate),
}

impl LedgerPredicate {
    pub fn holds(&self, ledger: &WorldLedger) -> bool {
        self.violation(ledger).is_none()
    }

    /// Human-readable reason when the predicate fails.
    pub fn violation(&self, ledger: &WorldLedger) -> Option<String> {
        match self {
            LedgerPredicate::SeasonIs(s) if ledger.season != *s => {
                Some(format!("season is {:?}, requires {:?}", ledger.season, s))
            }
            LedgerPredicate::SeasonNot(s) if ledger.season == *s => {
                Some(format!("season is {:?}", ledger.season))
            }
            LedgerPredicate::Variable(p) if !p.holds(ledger) => {
                let observed = match ledger.intensity(&p.variable) {
                    Some(i) => format!(
                        "{} is {} ({:?})",
                        p.variable,
                        i,
                        ledger.thresholds.level_of(i)
                    ),
                    None => format!("{} is undefined", p.variable),
                };
                Some(format!("{observed}, requires {p}"))
            }
            _ => None,
        }
    }
}

impl fmt::Display for LedgerPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LedgerPredicate::SeasonIs(s) => write!(f, "season == {s:?}"),
            LedgerPredicate::SeasonNot(s) => write!(f, "season != {s:?}"),
            LedgerPredicate::Variable(p) => p.fmt(f),
        }
    }
}

/// Per-tick intensity change applied while an event is active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventEffect {
    pub variable: String,
    pub delta_per_tick: f64,
    pub duration_ticks: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroEventRule {
    pub id: String,
    pub name: String,
    /// Conjunction; every predicate must hold.
    pub trigger: Vec<VariablePredicate>,
    #[serde(default)]
    pub consistency_requirements: Vec<LedgerPredicate>,
    #[serde(default)]
    pub effects: Vec<EventEffect>,
    #[serde(default)]
    pub cooldown_ticks: u64,
}

impl MacroEventRule {
    pub fn trigger_holds(&self, ledger: &WorldLedger) -> bool {
        self.trigger.iter().all(|p| p.holds(ledger))
    }
}

/// Outcome of the causal critic as stored on an event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventVerdict {
    /// Candidate not yet reviewed.
    Pending,
    Accept,
    Reject(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroEvent {
    pub rule_id: String,
    pub instance_id: String,
    pub name: String,
    pub fired_tick: u64,
    pub trigger_snapshot: BTreeMap<String, f64>,
    pub critic_verdict: EventVerdict,
}

impl MacroEvent {
    pub fn is_accepted(&self) -> bool {
        self.critic_verdict == EventVerdict::Accept
    }
}
