//! The tick loop tying the three layers together.
//!
//! ```text
//! Clock -> MacroEval -> Critic -> Activation -> Compile -> Deliver -> Score -> Act -> Migrate
//! ```
//!
//! Within a phase, NPC work runs in NPC-id order and directive work in
//! directive-id order, so a trace is a pure function of scenario and seed.
//! Dialogue is requested between ticks and never feeds back into the loop.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::director::{
    advance_clock, apply_event, CausalCritic, DeclarativeCritic, MacroReasoner, RuleReasoner,
};
use crate::error::{CascadeError, Result};
use crate::hub::{
    broadcast, compile_directives, expire_directives, route_activation, DirectiveIdSource,
};
use crate::model::{Directive, MacroEvent, NpcProfile, ParamValue, WorldLedger};
use crate::npc::{
    execute_action, migrate_tags, request_dialogue, score_directive, select_action,
    DialogueProvider, DialogueSnapshot, LlmCallCounter, UtilityBreakdown,
};
use crate::scenario::Scenario;
use crate::trace::{
    emit, MemorySink, Phase, RunMeta, TraceEvent, TraceKind, TracePayload, TraceSink,
    TRACE_SCHEMA_VERSION,
};

/// Per-kind event counts for a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    pub ticks: u64,
    pub counts: BTreeMap<TraceKind, u64>,
}

impl RunStats {
    pub fn count(&self, kind: TraceKind) -> u64 {
        self.counts.get(&kind).copied().unwrap_or(0)
    }

    /// One-line run summary.
    pub fn summary(&self, npc_count: usize) -> String {
        format!(
            "ticks={} npcs={} events_fired={} events_rejected={} directives_issued={} actions_executed={} llm_calls={}",
            self.ticks,
            npc_count,
            self.count(TraceKind::EventFired),
            self.count(TraceKind::EventRejected),
            self.count(TraceKind::DirectiveIssued),
            self.count(TraceKind::ActionExecuted),
            self.count(TraceKind::DialogueRequested),
        )
    }
}

#[derive(Debug, Clone)]
struct NpcSlot {
    profile: NpcProfile,
    last_action: Option<String>,
}

pub struct Simulation<S: TraceSink> {
    scenario: Scenario,
    ledger: WorldLedger,
    npcs: Vec<NpcSlot>,
    active: Vec<Directive>,
    ids: DirectiveIdSource,
    rng: ChaCha8Rng,
    llm_calls: LlmCallCounter,
    stats: RunStats,
    critic: Box<dyn CausalCritic>,
    reasoner: Box<dyn MacroReasoner>,
    sink: S,
}

impl<S: TraceSink> Simulation<S> {
    /// Starts a run and writes the trace header. `planned_ticks` is recorded
    /// in the header only.
    pub fn new(scenario: Scenario, seed: u64, planned_ticks: u64, mut sink: S) -> Result<Self> {
        let meta = RunMeta {
            kind: RunMeta::KIND.to_string(),
            scenario: scenario.meta.name.clone(),
            seed,
            schema_version: TRACE_SCHEMA_VERSION,
            npc_count: scenario.npcs.len(),
            ticks: planned_ticks,
            utility_weights: scenario.utility_weights,
            npc_names: scenario
                .npcs
                .iter()
                .map(|n| (n.id.clone(), n.display_name().to_string()))
                .collect(),
        };
        sink.write_meta(&meta).map_err(CascadeError::Sink)?;
        let npcs = scenario
            .npcs
            .iter()
            .map(|p| NpcSlot {
                profile: p.clone(),
                last_action: None,
            })
            .collect();
        Ok(Self {
            ledger: scenario.initial_ledger(),
            scenario,
            npcs,
            active: Vec::new(),
            ids: DirectiveIdSource::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            llm_calls: LlmCallCounter::default(),
            stats: RunStats::default(),
            critic: Box::new(DeclarativeCritic),
            reasoner: Box::new(RuleReasoner),
            sink,
        })
    }

    pub fn with_critic(mut self, critic: Box<dyn CausalCritic>) -> Self {
        self.critic = critic;
        self
    }

    pub fn with_reasoner(mut self, reasoner: Box<dyn MacroReasoner>) -> Self {
        self.reasoner = reasoner;
        self
    }

    pub fn ledger(&self) -> &WorldLedger {
        &self.ledger
    }

    pub fn npcs(&self) -> impl Iterator<Item = &NpcProfile> {
        self.npcs.iter().map(|s| &s.profile)
    }

    pub fn last_action(&self, npc_id: &str) -> Option<&str> {
        self.slot(npc_id).and_then(|s| s.last_action.as_deref())
    }

    pub fn active_directives(&self) -> &[Directive] {
        &self.active
    }

    pub fn llm_calls(&self) -> u64 {
        self.llm_calls.calls()
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }

    fn slot(&self, npc_id: &str) -> Option<&NpcSlot> {
        self.npcs
            .binary_search_by(|s| s.profile.id.as_str().cmp(npc_id))
            .ok()
            .map(|i| &self.npcs[i])
    }

    fn take_ledger(&mut self) -> WorldLedger {
        let empty = WorldLedger::new(self.ledger.season, self.ledger.thresholds, []);
        std::mem::replace(&mut self.ledger, empty)
    }

    fn record(&mut self, phase: Phase, payload: TracePayload) -> Result<()> {
        let event = TraceEvent::new(self.ledger.tick, phase, payload);
        emit(&event, &mut self.sink)?;
        *self.stats.counts.entry(event.kind()).or_default() += 1;
        Ok(())
    }

    pub fn run(&mut self, ticks: u64) -> Result<()> {
        for _ in 0..ticks {
            self.step()?;
        }
        Ok(())
    }

    /// Executes one full tick.
    pub fn step(&mut self) -> Result<()> {
        // Clock
        let ledger = self.take_ledger();
        self.ledger = advance_clock(ledger, &self.scenario.drift_schedule, &mut self.rng);
        self.stats.ticks += 1;
        let tick = self.ledger.tick;
        self.active = expire_directives(std::mem::take(&mut self.active), tick);
        let variables = self
            .ledger
            .variables
            .iter()
            .map(|(k, v)| (k.clone(), v.intensity))
            .collect();
        self.record(
            Phase::Clock,
            TracePayload::TickAdvanced {
                season: self.ledger.season,
                variables,
            },
        )?;

        // MacroEval + Critic
        let candidates = self
            .reasoner
            .propose(&self.ledger, &self.scenario.macro_rules);
        let mut accepted: Vec<MacroEvent> = Vec::new();
        for mut candidate in candidates {
            let rule = self
                .scenario
                .rule(&candidate.rule_id)
                .ok_or_else(|| {
                    CascadeError::Invariant(format!(
                        "candidate for unknown rule {}",
                        candidate.rule_id
                    ))
                })?
                .clone();
            let verdict = self.critic.review(&candidate, &rule, &self.ledger);
            candidate.critic_verdict = verdict.as_event_verdict();
            if verdict.accepted {
                let ledger = self.take_ledger();
                self.ledger = apply_event(ledger, &candidate, &rule)?;
                self.record(
                    Phase::Critic,
                    TracePayload::EventFired {
                        rule_id: candidate.rule_id.clone(),
                        instance_id: candidate.instance_id.clone(),
                        name: candidate.name.clone(),
                        trigger_snapshot: candidate.trigger_snapshot.clone(),
                    },
                )?;
                accepted.push(candidate);
            } else {
                self.record(
                    Phase::Critic,
                    TracePayload::EventRejected {
                        rule_id: candidate.rule_id.clone(),
                        instance_id: candidate.instance_id.clone(),
                        reason: verdict.reason,
                        violated_requirement: verdict.violated_requirement,
                    },
                )?;
            }
        }

        // Activation
        let mut activated: Vec<(usize, usize)> = Vec::new();
        for (ei, event) in accepted.iter().enumerate() {
            let modules = route_activation(event, &self.ledger, &self.scenario.domain_modules);
            for module in modules {
                let mi = self
                    .scenario
                    .domain_modules
                    .iter()
                    .position(|m| m.id == module.id)
                    .expect("module comes from this scenario");
                activated.push((ei, mi));
            }
        }
        for &(ei, mi) in &activated {
            self.record(
                Phase::Activation,
                TracePayload::ModuleActivated {
                    module: self.scenario.domain_modules[mi].id.clone(),
                    cause_event: accepted[ei].instance_id.clone(),
                },
            )?;
        }

        // Compile
        let mut issued = Vec::new();
        for &(ei, mi) in &activated {
            let module = &self.scenario.domain_modules[mi];
            issued.extend(compile_directives(
                module,
                &accepted[ei],
                &self.ledger,
                &mut self.ids,
            )?);
        }
        for d in &issued {
            self.record(
                Phase::Compile,
                TracePayload::DirectiveIssued {
                    directive: d.clone(),
                },
            )?;
        }

        // Deliver
        let roster: Vec<NpcProfile> = self.npcs.iter().map(|s| s.profile.clone()).collect();
        for record in broadcast(&issued, &roster) {
            self.record(
                Phase::Deliver,
                TracePayload::DirectiveDelivered {
                    directive_id: record.directive_id,
                    npcs: record.matched_npc_ids,
                },
            )?;
        }
        self.active.extend(issued);

        // Score
        let weights = self.scenario.utility_weights;
        let mut scored: Vec<Vec<UtilityBreakdown>> = Vec::with_capacity(self.npcs.len());
        for slot in &self.npcs {
            let mut mine = Vec::new();
            for d in self
                .active
                .iter()
                .filter(|d| d.selector.matches(&slot.profile.tags))
            {
                let binding = self
                    .scenario
                    .action_catalog
                    .get(&d.action_id)
                    .ok_or_else(|| {
                        CascadeError::Invariant(format!(
                            "directive {} has uncataloged action {}",
                            d.id, d.action_id
                        ))
                    })?;
                mine.push(score_directive(&slot.profile, d, binding, &weights));
            }
            scored.push(mine);
        }
        for breakdown in scored.iter().flatten() {
            self.record(
                Phase::Score,
                TracePayload::UtilityEvaluated(breakdown.clone()),
            )?;
        }

        // Act
        for (i, mine) in scored.iter().enumerate() {
            let accepted: Vec<UtilityBreakdown> =
                mine.iter().filter(|b| b.accepted).cloned().collect();
            let slot = &self.npcs[i];
            let selection = select_action(
                &slot.profile,
                &accepted,
                &self.scenario.behavior_tree,
                &self.ledger,
            )
            .ok_or_else(|| {
                CascadeError::Invariant(format!(
                    "behaviour tree chose nothing for {}",
                    slot.profile.id
                ))
            })?;
            let binding = self
                .scenario
                .action_catalog
                .get(&selection.action_id)
                .ok_or_else(|| {
                    CascadeError::Invariant(format!("uncataloged action {}", selection.action_id))
                })?
                .clone();
            let parameters: BTreeMap<String, ParamValue> = selection
                .directive_id
                .as_ref()
                .and_then(|id| self.active.iter().find(|d| &d.id == id))
                .map(|d| d.parameters.clone())
                .unwrap_or_default();
            let profile = self.npcs[i].profile.clone();
            let (profile, outcome) = execute_action(profile, &binding);
            let payload = TracePayload::ActionExecuted {
                npc: profile.id.clone(),
                tags: profile.tags.iter().cloned().collect(),
                action_id: selection.action_id.clone(),
                directive_id: selection.directive_id.clone(),
                parameters,
                local_before: outcome.local_before,
                local_after: outcome.local_after,
            };
            self.npcs[i].profile = profile;
            self.npcs[i].last_action = Some(selection.action_id);
            self.record(Phase::Act, payload)?;
        }

        // Migrate
        for i in 0..self.npcs.len() {
            let profile = self.npcs[i].profile.clone();
            let (profile, migration) = migrate_tags(profile, &self.scenario.migration_rules);
            if let Some(m) = migration {
                let npc = profile.id.clone();
                self.npcs[i].profile = profile;
                self.record(
                    Phase::Migrate,
                    TracePayload::TagMigrated {
                        npc,
                        from_tag: m.from_tag,
                        to_tag: m.to_tag,
                        field: m.field,
                        value: m.value,
                    },
                )?;
            }
        }
        Ok(())
    }

    /// Player interaction channel. Invokes the provider once with a
    /// read-only snapshot; NPC and world state are not touched.
    pub fn request_dialogue(
        &mut self,
        npc_id: &str,
        utterance: &str,
        provider: &dyn DialogueProvider,
    ) -> Result<std::result::Result<String, String>> {
        let slot = self
            .slot(npc_id)
            .ok_or_else(|| CascadeError::Invariant(format!("unknown npc {npc_id}")))?;
        let snapshot = DialogueSnapshot::new(
            &slot.profile,
            slot.last_action.as_deref(),
            self.ledger.active_event_names(),
            self.active
                .iter()
                .filter(|d| d.selector.matches(&slot.profile.tags))
                .map(|d| d.action_id.clone())
                .collect(),
        );
        let reply = request_dialogue(&snapshot, utterance, provider, &mut self.llm_calls)
            .map_err(|e| e.to_string());
        let (response, error) = match &reply {
            Ok(text) => (Some(text.clone()), None),
            Err(e) => (None, Some(e.clone())),
        };
        self.record(
            Phase::Dialogue,
            TracePayload::DialogueRequested {
                npc: npc_id.to_string(),
                utterance: utterance.to_string(),
                response,
                error,
            },
        )?;
        Ok(reply)
    }

    /// Flushes the sink and hands it back.
    pub fn finish(mut self) -> Result<(RunStats, S)> {
        self.sink.flush().map_err(CascadeError::Sink)?;
        Ok((self.stats, self.sink))
    }
}

/// Runs a scenario to completion in memory.
pub fn run_in_memory(scenario: &Scenario, seed: u64, ticks: u64) -> Result<(RunStats, MemorySink)> {
    let mut sim = Simulation::new(scenario.clone(), seed, ticks, MemorySink::default())?;
    sim.run(ticks)?;
    sim.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub npcs: usize,
    pub ticks: u64,
    pub wall_ms: f64,
    pub per_tick_us: f64,
    pub directives_issued: u64,
    pub utility_evaluated: u64,
    pub predicted_utility_evaluated: u64,
    pub actions_executed: u64,
}

/// Runs `scenario` at each population size, sequentially.
pub fn bench(
    scenario: &Scenario,
    scales: &[usize],
    ticks: u64,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(scales.len());
    for &n in scales {
        let scaled = scenario.with_population(n);
        let start = Instant::now();
        let (stats, sink) = run_in_memory(&scaled, seed, ticks)?;
        let wall = start.elapsed();
        rows.push(BenchRow {
            npcs: n,
            ticks,
            wall_ms: wall.as_secs_f64() * 1e3,
            per_tick_us: wall.as_secs_f64() * 1e6 / ticks.max(1) as f64,
            directives_issued: stats.count(TraceKind::DirectiveIssued),
            utility_evaluated: stats.count(TraceKind::UtilityEvaluated),
            predicted_utility_evaluated: predict_utility_evaluations(
                &scaled.npcs,
                &sink.events,
                ticks,
            ),
            actions_executed: stats.count(TraceKind::ActionExecuted),
        });
    }
    Ok(rows)
}

/// Expected `UtilityEvaluated` count from a tag census: for every tick and
/// every directive live on it, the number of NPCs whose tags match. Tag sets
/// are replayed from `TagMigrated` events, which take effect the tick after.
pub fn predict_utility_evaluations(
    roster: &[NpcProfile],
    events: &[TraceEvent],
    ticks: u64,
) -> u64 {
    let mut tags: BTreeMap<&str, std::collections::BTreeSet<crate::model::Tag>> = roster
        .iter()
        .map(|n| (n.id.as_str(), n.tags.clone()))
        .collect();
    let mut issued: Vec<&Directive> = Vec::new();
    let mut migrations: BTreeMap<u64, Vec<(&str, &crate::model::Tag, &crate::model::Tag)>> =
        BTreeMap::new();
    for e in events {
        match &e.payload {
            TracePayload::DirectiveIssued { directive } => issued.push(directive),
            TracePayload::TagMigrated {
                npc,
                from_tag,
                to_tag,
                ..
            } => {
                migrations
                    .entry(e.tick)
                    .or_default()
                    .push((npc.as_str(), from_tag, to_tag));
            }
            _ => {}
        }
    }
    let mut total = 0;
    for tick in 1..=ticks {
        for d in issued
            .iter()
            .filter(|d| d.issued_tick <= tick && d.is_live_at(tick))
        {
            total += tags.values().filter(|t| d.selector.matches(t)).count() as u64;
        }
        for (npc, from, to) in migrations.get(&tick).into_iter().flatten() {
            if let Some(t) = tags.get_mut(npc) {
                t.remove(*from);
                t.insert((*to).clone());
            }
        }
    }
    total
}
