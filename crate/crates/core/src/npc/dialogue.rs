//! Player-facing dialogue, kept apart from behaviour.
//!
//! Providers see an owned snapshot and return text. They get no handle to
//! the simulation, so nothing they do can change NPC or world state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{NpcProfile, Tag};

/// Read-only grounding handed to a provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueSnapshot {
    pub npc_id: String,
    pub name: String,
    pub role_tag: Tag,
    pub tags: Vec<Tag>,
    pub last_action: Option<String>,
    pub active_events: Vec<String>,
    pub active_directives: Vec<String>,
}

impl DialogueSnapshot {
    pub fn new(
        npc: &NpcProfile,
        last_action: Option<&str>,
        active_events: Vec<String>,
        active_directives: Vec<String>,
    ) -> Self {
        Self {
            npc_id: npc.id.clone(),
            name: npc.display_name().to_string(),
            role_tag: npc.role_tag.clone(),
            tags: npc.tags.iter().cloned().collect(),
            last_action: last_action.map(str::to_string),
            active_events,
            active_directives,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("dialogue provider failed: {0}")]
pub struct DialogueError(pub String);

pub trait DialogueProvider {
    fn respond(
        &self,
        snapshot: &DialogueSnapshot,
        utterance: &str,
    ) -> Result<String, DialogueError>;
}

/// Counts generative-model invocations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LlmCallCounter {
    calls: u64,
}

impl LlmCallCounter {
    pub fn record(&mut self) {
        self.calls += 1;
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }
}

/// Invokes the provider exactly once and counts the call, whether or not it
/// succeeds.
pub fn request_dialogue(
    snapshot: &DialogueSnapshot,
    utterance: &str,
    provider: &dyn DialogueProvider,
    counter: &mut LlmCallCounter,
) -> Result<String, DialogueError> {
    counter.record();
    provider.respond(snapshot, utterance)
}

/// Deterministic template provider: `[Speaker|last_action] line`.
///
/// Lines are looked up by last action; `{event}` expands to the first
/// active event name in lower case.
#[derive(Debug, Clone)]
pub struct StubDialogueProvider {
    lines: BTreeMap<String, String>,
}

impl Default for StubDialogueProvider {
    fn default() -> Self {
        let lines = [
            (
                "raise_price",
                "Water is scarce; prices reflect the {event}.",
            ),
            (
                "offer_discounted_water",
                "Nobody should go thirsty during the {event}.",
            ),
            (
                "ration_water",
                "Every drop goes to the crops until the {event} passes.",
            ),
            ("patrol_water_sources", "The wells are guarded. Move along."),
            (
                "call_town_hall",
                "Meet at the town hall; we will get through the {event} together.",
            ),
            ("idle", "Not my problem."),
        ];
        Self {
            lines: lines
                .into_iter()
                .map(|(a, l)| (a.to_string(), l.to_string()))
                .collect(),
        }
    }
}

impl StubDialogueProvider {
    pub fn with_line(mut self, action_id: impl Into<String>, line: impl Into<String>) -> Self {
        self.lines.insert(action_id.into(), line.into());
        self
    }
}

impl DialogueProvider for StubDialogueProvider {
    fn respond(
        &self,
        snapshot: &DialogueSnapshot,
        _utterance: &str,
    ) -> Result<String, DialogueError> {
        let speaker: String = snapshot.name.split_whitespace().collect();
        let action = snapshot.last_action.as_deref().unwrap_or("none");
        let event = snapshot
            .active_events
            .first()
            .map(|e| e.to_lowercase())
            .unwrap_or_else(|| "times".to_string());
        let line = match self.lines.get(action) {
            Some(template) => template.replace("{event}", &event),
            None if snapshot.active_events.is_empty() => "Quiet days.".to_string(),
            None => format!("Hard times with the {event}."),
        };
        Ok(format!("[{speaker}|{action}] {line}"))
    }
}
