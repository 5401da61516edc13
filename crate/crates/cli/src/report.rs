//! Text rendering for `report` and `bench`.

use std::collections::BTreeMap;
use std::fmt::Write;

use cascade_core::engine::BenchRow;
use cascade_core::model::ParamValue;
use cascade_core::trace::{Phase, RunMeta, TraceEvent, TracePayload};
use cascade_core::{CascadeError, Result};

/// A trace whose last ticked Clock event falls short of the header's tick
/// count was cut off mid-run.
pub fn check_complete(meta: &RunMeta, events: &[TraceEvent]) -> Result<()> {
    let last = events
        .iter()
        .filter(|e| e.phase == Phase::Clock)
        .map(|e| e.tick)
        .max()
        .unwrap_or(0);
    if last < meta.ticks {
        return Err(CascadeError::TraceParse {
            line: events.len() + 2,
            message: format!("trace ends at tick {last} of {}", meta.ticks),
        });
    }
    Ok(())
}

pub fn action_label(action_id: &str, parameters: &BTreeMap<String, ParamValue>) -> String {
    if parameters.is_empty() {
        return action_id.to_string();
    }
    let params: Vec<String> = parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{action_id} ({})", params.join(", "))
}

/// NPC | Tags | final-tick action.
pub fn npc_table(meta: &RunMeta, events: &[TraceEvent]) -> String {
    let last_tick = events.iter().map(|e| e.tick).max().unwrap_or(0);
    let mut rows: Vec<[String; 3]> = Vec::new();
    for e in events.iter().filter(|e| e.tick == last_tick) {
        if let TracePayload::ActionExecuted {
            npc,
            tags,
            action_id,
            parameters,
            ..
        } = &e.payload
        {
            let name = meta
                .npc_names
                .get(npc)
                .cloned()
                .unwrap_or_else(|| npc.clone());
            let tags = tags.iter().map(|t| format!("[{t}]")).collect::<String>();
            rows.push([name, tags, action_label(action_id, parameters)]);
        }
    }
    let header = [
        "NPC".to_string(),
        "Tags".to_string(),
        format!("Action (tick {last_tick})"),
    ];
    let mut widths = header.clone().map(|h| h.len());
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String; 3]| {
        let _ = writeln!(
            out,
            "| {:<w0$} | {:<w1$} | {:<w2$} |",
            cells[0],
            cells[1],
            cells[2],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2]
        );
    };
    line(&mut out, &header);
    let _ = writeln!(
        out,
        "|{}|{}|{}|",
        "-".repeat(widths[0] + 2),
        "-".repeat(widths[1] + 2),
        "-".repeat(widths[2] + 2)
    );
    for row in &rows {
        line(&mut out, row);
    }
    out
}

pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>7} {:>6} {:>10} {:>12} {:>18} {:>18} {:>18} {:>17}",
        "npcs",
        "ticks",
        "wall_ms",
        "per_tick_us",
        "directives_issued",
        "utility_evaluated",
        "census_prediction",
        "actions_executed"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>7} {:>6} {:>10.2} {:>12.1} {:>18} {:>18} {:>18} {:>17}",
            r.npcs,
            r.ticks,
            r.wall_ms,
            r.per_tick_us,
            r.directives_issued,
            r.utility_evaluated,
            r.predicted_utility_evaluated,
            r.actions_executed
        );
    }
    out
}

/// Count assertions over a bench. Returns a message per failure.
pub fn bench_failures(rows: &[BenchRow]) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(first) = rows.first() {
        for r in rows
            .iter()
            .filter(|r| r.directives_issued != first.directives_issued)
        {
            out.push(format!(
                "directives_issued differs: {} at {} npcs vs {} at {} npcs",
                r.directives_issued, r.npcs, first.directives_issued, first.npcs
            ));
        }
    }
    for r in rows
        .iter()
        .filter(|r| r.utility_evaluated != r.predicted_utility_evaluated)
    {
        out.push(format!(
            "utility_evaluated {} at {} npcs, census predicts {}",
            r.utility_evaluated, r.npcs, r.predicted_utility_evaluated
        ));
    }
    out
}
