//! Append-only run trace, one JSON object per line.
//!
//! The first line is a [`RunMeta`] header; every following line is a
//! [`TraceEvent`]. Ticks are the only notion of time in a trace.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CascadeError, Result};
use crate::model::{Directive, ParamValue, Season, Tag};
use crate::npc::{UtilityBreakdown, UtilityWeights};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Clock,
    MacroEval,
    Critic,
    Activation,
    Compile,
    Deliver,
    Score,
    Act,
    Migrate,
    Dialogue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TraceKind {
    TickAdvanced,
    EventFired,
    EventRejected,
    ModuleActivated,
    DirectiveIssued,
    DirectiveDelivered,
    UtilityEvaluated,
    ActionExecuted,
    TagMigrated,
    DialogueRequested,
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TracePayload {
    TickAdvanced {
        season: Season,
        variables: BTreeMap<String, f64>,
    },
    EventFired {
        rule_id: String,
        instance_id: String,
        name: String,
        trigger_snapshot: BTreeMap<String, f64>,
    },
    EventRejected {
        rule_id: String,
        instance_id: String,
        reason: String,
        violated_requirement: Option<String>,
    },
    ModuleActivated {
        module: String,
        cause_event: String,
    },
    DirectiveIssued {
        directive: Directive,
    },
    DirectiveDelivered {
        directive_id: String,
        npcs: Vec<String>,
    },
    UtilityEvaluated(UtilityBreakdown),
    ActionExecuted {
        npc: String,
        tags: Vec<Tag>,
        action_id: String,
        directive_id: Option<String>,
        parameters: BTreeMap<String, ParamValue>,
        local_before: BTreeMap<String, f64>,
        local_after: BTreeMap<String, f64>,
    },
    TagMigrated {
        npc: String,
        from_tag: Tag,
        to_tag: Tag,
        field: String,
        value: f64,
    },
    DialogueRequested {
        npc: String,
        utterance: String,
        response: Option<String>,
        error: Option<String>,
    },
}

impl TracePayload {
    pub fn kind(&self) -> TraceKind {
        match self {
            TracePayload::TickAdvanced { .. } => TraceKind::TickAdvanced,
            TracePayload::EventFired { .. } => TraceKind::EventFired,
            TracePayload::EventRejected { .. } => TraceKind::EventRejected,
            TracePayload::ModuleActivated { .. } => TraceKind::ModuleActivated,
            TracePayload::DirectiveIssued { .. } => TraceKind::DirectiveIssued,
            TracePayload::DirectiveDelivered { .. } => TraceKind::DirectiveDelivered,
            TracePayload::UtilityEvaluated(_) => TraceKind::UtilityEvaluated,
            TracePayload::ActionExecuted { .. } => TraceKind::ActionExecuted,
            TracePayload::TagMigrated { .. } => TraceKind::TagMigrated,
            TracePayload::DialogueRequested { .. } => TraceKind::DialogueRequested,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    pub phase: Phase,
    #[serde(flatten)]
    pub payload: TracePayload,
}

impl TraceEvent {
    pub fn new(tick: u64, phase: Phase, payload: TracePayload) -> Self {
        Self {
            tick,
            phase,
            payload,
        }
    }

    pub fn kind(&self) -> TraceKind {
        self.payload.kind()
    }
}

/// Header line of every trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMeta {
    pub kind: String,
    pub scenario: String,
    pub seed: u64,
    pub schema_version: u32,
    pub npc_count: usize,
    pub ticks: u64,
    pub utility_weights: UtilityWeights,
    /// NPC id -> display name.
    pub npc_names: BTreeMap<String, String>,
}

impl RunMeta {
    pub const KIND: &'static str = "RunMeta";
}

pub trait TraceSink {
    fn write_meta(&mut self, meta: &RunMeta) -> io::Result<()>;
    fn write_event(&mut self, event: &TraceEvent) -> io::Result<()>;
    fn flush(&mut self) -> io::Result<()>;
}

/// Appends an event; a failing sink aborts the run.
pub fn emit(event: &TraceEvent, sink: &mut dyn TraceSink) -> Result<()> {
    sink.write_event(event).map_err(CascadeError::Sink)
}

/// Line-delimited JSON writer.
pub struct JsonlSink<W: Write> {
    out: io::BufWriter<W>,
}

impl<W: Write> JsonlSink<W> {
    pub fn new(out: W) -> Self {
        Self {
            out: io::BufWriter::new(out),
        }
    }

    pub fn into_inner(self) -> io::Result<W> {
        self.out.into_inner().map_err(|e| e.into_error())
    }

    fn write_line<T: Serialize>(&mut self, value: &T) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out.write_all(b"\n")
    }
}

impl<W: Write> TraceSink for JsonlSink<W> {
    fn write_meta(&mut self, meta: &RunMeta) -> io::Result<()> {
        self.write_line(meta)
    }

    fn write_event(&mut self, event: &TraceEvent) -> io::Result<()> {
        self.write_line(event)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Keeps the trace in memory.
#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    pub meta: Option<RunMeta>,
    pub events: Vec<TraceEvent>,
}

impl TraceSink for MemorySink {
    fn write_meta(&mut self, meta: &RunMeta) -> io::Result<()> {
        self.meta = Some(meta.clone());
        Ok(())
    }

    fn write_event(&mut self, event: &TraceEvent) -> io::Result<()> {
        self.events.push(event.clone());
        Ok(())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl<S: TraceSink + ?Sized> TraceSink for &mut S {
    fn write_meta(&mut self, meta: &RunMeta) -> io::Result<()> {
        (**self).write_meta(meta)
    }

    fn write_event(&mut self, event: &TraceEvent) -> io::Result<()> {
        (**self).write_event(event)
    }

    fn flush(&mut self) -> io::Result<()> {
        (**self).flush()
    }
}

/// Parses a trace, reporting the 1-based line number of the first bad line.
pub fn read_trace<R: BufRead>(reader: R) -> Result<(RunMeta, Vec<TraceEvent>)> {
    let mut lines = reader.lines().enumerate();
    let parse_err = |line: usize, message: String| CascadeError::TraceParse { line, message };

    let meta = match lines.next() {
        None => return Err(parse_err(1, "empty trace".into())),
        Some((_, line)) => {
            let line = line.map_err(|e| parse_err(1, e.to_string()))?;
            let meta: RunMeta =
                serde_json::from_str(&line).map_err(|e| parse_err(1, e.to_string()))?;
            if meta.kind != RunMeta::KIND {
                return Err(parse_err(1, format!("expected {} header", RunMeta::KIND)));
            }
            meta
        }
    };
    let mut events = Vec::new();
    for (idx, line) in lines {
        let n = idx + 1;
        let line = line.map_err(|e| parse_err(n, e.to_string()))?;
        let event = serde_json::from_str(&line).map_err(|e| parse_err(n, e.to_string()))?;
        events.push(event);
    }
    Ok((meta, events))
}

/// Events with dialogue removed; used to check dialogue isolation.
pub fn non_dialogue_projection(events: &[TraceEvent]) -> Vec<&TraceEvent> {
    events
        .iter()
        .filter(|e| e.kind() != TraceKind::DialogueRequested)
        .collect()
}

pub fn count_kind(events: &[TraceEvent], kind: TraceKind) -> usize {
    events.iter().filter(|e| e.kind() == kind).count()
}
