//! World state tracked by the macro layer: causal variables, season, and the
//! record of macro events that have fired.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rule::{EventEffect, MacroEvent};

/// Coarse severity of a causal variable, derived from its intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    Normal = 0,
    Elevated = 1,
    Critical = 2,
}

/// Intensity cut points for [`Level`]. Intensities below `elevated` are
/// Normal, those at or above `critical` are Critical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelThresholds {
    pub elevated: f64,
    pub critical: f64,
}

impl Default for LevelThresholds {
    fn default() -> Self {
        Self {
            elevated: 0.4,
            critical: 0.8,
        }
    }
}

impl LevelThresholds {
    pub fn level_of(&self, intensity: f64) -> Level {
        if intensity >= self.critical {
            Level::Critical
        } else if intensity >= self.elevated {
            Level::Elevated
        } else {
            Level::Normal
        }
    }

    pub fn is_well_formed(&self) -> bool {
        0.0 < self.elevated && self.elevated < self.critical && self.critical <= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub tick: u64,
    pub intensity: f64,
}

/// A named world quantity such as water scarcity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalVariable {
    pub name: String,
    pub intensity: f64,
    pub history: Vec<HistoryEntry>,
}

impl CausalVariable {
    /// Creates a variable with its initial intensity recorded at tick 0.
    pub fn new(name: impl Into<String>, intensity: f64) -> Self {
        let intensity = clamp_unit(intensity);
        Self {
            name: name.into(),
            intensity,
            history: vec![HistoryEntry { tick: 0, intensity }],
        }
    }

    pub fn level(&self, thresholds: &LevelThresholds) -> Level {
        thresholds.level_of(self.intensity)
    }

    /// Sets a new intensity (clamped to `[0, 1]`) and records it if it changed.
    pub(crate) fn set_intensity(&mut self, tick: u64, intensity: f64) -> bool {
        let intensity = clamp_unit(intensity);
        if intensity == self.intensity {
            return false;
        }
        self.intensity = intensity;
        self.history.push(HistoryEntry { tick, intensity });
        true
    }
}

pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Season {
    Dry,
    Rainy,
    Temperate,
}

/// Effect of an active event with its remaining duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveEffect {
    pub variable: String,
    pub delta_per_tick: f64,
    pub remaining_ticks: u32,
}

impl From<&EventEffect> for ActiveEffect {
    fn from(effect: &EventEffect) -> Self {
        Self {
            variable: effect.variable.clone(),
            delta_per_tick: effect.delta_per_tick,
            remaining_ticks: effect.duration_ticks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveEvent {
    pub instance_id: String,
    pub rule_id: String,
    pub name: String,
    pub effects: Vec<ActiveEffect>,
}

impl ActiveEvent {
    pub fn is_spent(&self) -> bool {
        self.effects.iter().all(|e| e.remaining_ticks == 0)
    }
}

/// The objective truth of the world. NPC behaviour is never recorded here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldLedger {
    pub tick: u64,
    pub season: Season,
    pub thresholds: LevelThresholds,
    pub variables: BTreeMap<String, CausalVariable>,
    /// Active events in activation order.
    pub active_events: Vec<ActiveEvent>,
    pub fired_log: Vec<MacroEvent>,
}

impl WorldLedger {
    pub fn new(
        season: Season,
        thresholds: LevelThresholds,
        variables: impl IntoIterator<Item = (String, f64)>,
    ) -> Self {
        let variables = variables
            .into_iter()
            .map(|(name, intensity)| (name.clone(), CausalVariable::new(name, intensity)))
            .collect();
        Self {
            tick: 0,
            season,
            thresholds,
            variables,
            active_events: Vec::new(),
            fired_log: Vec::new(),
        }
    }

    pub fn intensity(&self, variable: &str) -> Option<f64> {
        self.variables.get(variable).map(|v| v.intensity)
    }

    pub fn level(&self, variable: &str) -> Option<Level> {
        self.intensity(variable)
            .map(|i| self.thresholds.level_of(i))
    }

    pub fn is_active(&self, rule_id: &str) -> bool {
        self.active_events.iter().any(|e| e.rule_id == rule_id)
    }

    pub fn last_fired_tick(&self, rule_id: &str) -> Option<u64> {
        self.fired_log
            .iter()
            .rev()
            .find(|e| e.rule_id == rule_id)
            .map(|e| e.fired_tick)
    }

    pub fn active_event_names(&self) -> Vec<String> {
        self.active_events.iter().map(|e| e.name.clone()).collect()
    }
}
