//! Generative-model call accounting against a per-agent prompting baseline.
//!
//! The baseline issues one call per NPC per tick. Token figures are
//! `calls * tokens_per_call`, where `tokens_per_call` is a modelling constant
//! supplied by the caller, not a measurement.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::trace::{count_kind, TraceEvent, TraceKind};

pub const DEFAULT_TOKENS_PER_CALL: u64 = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub ticks: u64,
    pub npc_count: u64,
    pub tokens_per_call: u64,
    pub cascade_llm_calls: u64,
    pub baseline_llm_calls: u64,
    pub cascade_tokens: u64,
    pub baseline_tokens: u64,
    pub reduction_ratio: f64,
}

impl CostReport {
    pub fn from_counts(
        cascade_llm_calls: u64,
        npc_count: u64,
        ticks: u64,
        tokens_per_call: u64,
    ) -> Self {
        let baseline_llm_calls = npc_count * ticks;
        CostReport {
            ticks,
            npc_count,
            tokens_per_call,
            cascade_llm_calls,
            baseline_llm_calls,
            cascade_tokens: cascade_llm_calls * tokens_per_call,
            baseline_tokens: baseline_llm_calls * tokens_per_call,
            reduction_ratio: 1.0 - cascade_llm_calls as f64 / baseline_llm_calls.max(1) as f64,
        }
    }
}

/// Cascade calls are the `DialogueRequested` events in `trace`.
pub fn build_cost_report(
    trace: &[TraceEvent],
    npc_count: u64,
    ticks: u64,
    tokens_per_call: u64,
) -> CostReport {
    let calls = count_kind(trace, TraceKind::DialogueRequested) as u64;
    CostReport::from_counts(calls, npc_count, ticks, tokens_per_call)
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "cost model (modelled, tokens_per_call = {})",
            self.tokens_per_call
        )?;
        writeln!(f, "  ticks               {}", self.ticks)?;
        writeln!(f, "  npcs                {}", self.npc_count)?;
        writeln!(
            f,
            "  cascade llm calls   {:>8}   tokens {:>10}",
            self.cascade_llm_calls, self.cascade_tokens
        )?;
        writeln!(
            f,
            "  baseline llm calls  {:>8}   tokens {:>10}",
            self.baseline_llm_calls, self.baseline_tokens
        )?;
        write!(f, "  reduction ratio     {:.4}", self.reduction_ratio)
    }
}
