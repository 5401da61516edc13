//! Acceptance gate. One PASS/FAIL line per criterion; exits non-zero if any fail.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use serde_json::{json, Value};

use cascade_core::cost::{build_cost_report, DEFAULT_TOKENS_PER_CALL};
use cascade_core::director::evaluate_rules;
use cascade_core::engine::{run_in_memory, Simulation};
use cascade_core::hub::broadcast;
use cascade_core::model::{
    ActiveEvent, Comparator, Directive, EventVerdict, Level, LevelThresholds, MacroEvent,
    MacroEventRule, NpcProfile, ParamValue, Season, SelectorMode, Tag, TagSelector, Threshold,
    VariablePredicate, WorldLedger, WEALTH,
};
use cascade_core::npc::{
    migrate_tags, select_action, BehaviorTree, MigrationPredicate, StubDialogueProvider,
    TagMigrationRule, UtilityBreakdown, UtilityWeights,
};
use cascade_core::scenario::{drought_town, load_scenario, Scenario, DROUGHT_TOWN};
use cascade_core::trace::{
    non_dialogue_projection, read_trace, JsonlSink, MemorySink, TracePayload,
};

const CASES: u32 = 1000;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn runner() -> TestRunner {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tag(s: &str) -> Tag {
    Tag::new(s).unwrap()
}

fn drought_json() -> Value {
    serde_json::from_str(DROUGHT_TOWN).unwrap()
}

// 1 --------------------------------------------------------------------------

fn golden_mapping() -> Check {
    let start = Instant::now();
    let (_, sink) = run_in_memory(&drought_town(), 7, 30).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let tick = sink
        .events
        .iter()
        .find_map(|e| match &e.payload {
            TracePayload::EventFired { rule_id, .. } if rule_id == "severe_drought" => Some(e.tick),
            _ => None,
        })
        .ok_or("severe_drought never fired")?;
    let mut got: BTreeMap<&str, (&str, Option<&ParamValue>)> = BTreeMap::new();
    for e in sink.events.iter().filter(|e| e.tick == tick) {
        if let TracePayload::ActionExecuted {
            npc,
            action_id,
            parameters,
            ..
        } = &e.payload
        {
            got.insert(npc, (action_id, parameters.get("price_delta_pct")));
        }
    }
    let thirty = ParamValue::Number(30.0);
    let expected: [(&str, &str, Option<&ParamValue>); 7] = [
        ("mayor", "call_town_hall", None),
        ("merchant_1", "raise_price", Some(&thirty)),
        ("merchant_2", "offer_discounted_water", None),
        ("farmer_1", "ration_water", None),
        ("farmer_2", "idle", None),
        ("guard_1", "patrol_water_sources", None),
        ("guard_2", "idle", None),
    ];
    for (npc, action, param) in expected {
        let actual = got.get(npc).copied();
        ensure(actual == Some((action, param)), || {
            format!("{npc}: expected {action} {param:?}, got {actual:?}")
        })?;
    }
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "drought tick {tick}, 7/7 rows match, {:.1} ms",
        elapsed.as_secs_f64() * 1e3
    ))
}

// 2 --------------------------------------------------------------------------

fn zero_llm_loop() -> Check {
    let (stats, sink) = run_in_memory(&drought_town(), 7, 30).map_err(|e| e.to_string())?;
    let report = build_cost_report(&sink.events, 10, stats.ticks, DEFAULT_TOKENS_PER_CALL);
    ensure(report.cascade_llm_calls == 0, || {
        format!("{} cascade calls", report.cascade_llm_calls)
    })?;
    ensure(report.baseline_llm_calls == 300, || {
        format!("baseline {}", report.baseline_llm_calls)
    })?;
    ensure(report.reduction_ratio == 1.0, || {
        format!("ratio {}", report.reduction_ratio)
    })?;
    Ok("cascade 0 calls, baseline 300, reduction_ratio 1.0".into())
}

// 3 --------------------------------------------------------------------------

fn directive_count_independence() -> Check {
    let out = Command::new(env!("CARGO_BIN_EXE_cascade"))
        .args([
            "bench",
            "--npcs",
            "10,100,1000",
            "--ticks",
            "30",
            "--seed",
            "7",
        ])
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    ensure(out.status.success(), || {
        format!(
            "bench exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        )
    })?;
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for line in stdout.lines().skip(1) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() == 8 {
            if let (Ok(n), Ok(d), Ok(u), Ok(p)) = (
                cols[0].parse(),
                cols[4].parse(),
                cols[5].parse(),
                cols[6].parse(),
            ) {
                rows.push(vec![n, d, u, p]);
            }
        }
    }
    ensure(rows.len() == 3, || {
        format!("expected 3 rows, got:\n{stdout}")
    })?;
    let issued: BTreeSet<u64> = rows.iter().map(|r| r[1]).collect();
    ensure(issued.len() == 1, || {
        format!("DirectiveIssued varies: {issued:?}")
    })?;
    for r in &rows {
        ensure(r[2] == r[3], || {
            format!(
                "{} npcs: UtilityEvaluated {} vs census {}",
                r[0], r[2], r[3]
            )
        })?;
    }
    // independent recount at one scale
    let scaled = drought_town().with_population(100);
    let census: u64 = scaled.npcs.iter().map(census_weight).sum::<u64>();
    ensure(rows[1][2] == census, || {
        format!("independent census {census} vs {}", rows[1][2])
    })?;
    Ok(format!(
        "DirectiveIssued = {} at 10/100/1000; UtilityEvaluated {} / {} / {} match census",
        rows[0][1], rows[0][2], rows[1][2], rows[2][2]
    ))
}

/// Directive-ticks an NPC is scored against in the golden 30-tick run:
/// every module template is issued at tick 5 with ttl 30, so it stays live
/// through tick 30 (26 ticks).
fn census_weight(npc: &NpcProfile) -> u64 {
    let has = |t: &str| npc.tags.contains(t);
    let mut directives = 0;
    for (role, count) in [
        ("Leader", 1),
        ("Merchant", 2),
        ("Farmer", 1),
        ("Villager", 1),
        ("Guard", 1),
    ] {
        if has(role) {
            directives += count;
        }
    }
    directives * 26
}

// 4 --------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct CriticCase {
    season: Season,
    water: f64,
    drift: f64,
    duration: u32,
    cooldown: u64,
    seed: u64,
    ticks: u64,
}

fn critic_case() -> impl Strategy<Value = CriticCase> {
    (
        prop_oneof![
            Just(Season::Rainy),
            Just(Season::Dry),
            Just(Season::Temperate)
        ],
        0.0..=1.0f64,
        -0.05..0.15f64,
        1u32..8,
        0u64..6,
        any::<u64>(),
        1u64..40,
    )
        .prop_map(
            |(season, water, drift, duration, cooldown, seed, ticks)| CriticCase {
                season,
                water,
                drift,
                duration,
                cooldown,
                seed,
                ticks,
            },
        )
}

fn critic_scenario(c: &CriticCase) -> Scenario {
    let mut v = drought_json();
    v["ledger_init"]["season"] = serde_json::to_value(c.season).unwrap();
    v["ledger_init"]["variables"]["water_scarcity"] = json!(c.water);
    v["drift_schedule"][0]["delta_per_tick"] = json!(c.drift);
    v["drift_schedule"][0]["end_tick"] = json!(1000);
    v["macro_rules"][0]["effects"][0]["duration_ticks"] = json!(c.duration);
    v["macro_rules"][0]["effects"][1]["duration_ticks"] = json!(c.duration);
    v["macro_rules"][0]["cooldown_ticks"] = json!(c.cooldown);
    load_scenario(&v.to_string()).expect("variant stays valid")
}

fn critic_gate() -> Check {
    let rainy_rejections = Cell::new(0u64);
    let fired = Cell::new(0u64);
    runner()
        .run(&critic_case(), |c| {
            let mut sim =
                Simulation::new(critic_scenario(&c), c.seed, c.ticks, MemorySink::default())
                    .map_err(|e| TestCaseError::fail(e.to_string()))?;
            let mut rejected: BTreeSet<String> = BTreeSet::new();
            let mut seen = 0;
            for _ in 0..c.ticks {
                sim.step().map_err(|e| TestCaseError::fail(e.to_string()))?;
                let events = &sim.sink().events;
                for e in &events[seen..] {
                    match &e.payload {
                        TracePayload::EventRejected {
                            rule_id,
                            instance_id,
                            reason,
                            violated_requirement,
                        } => {
                            if rule_id == "severe_drought" {
                                prop_assert_eq!(c.season, Season::Rainy);
                                prop_assert_eq!(reason.as_str(), "season is Rainy");
                                prop_assert_eq!(
                                    violated_requirement.as_deref(),
                                    Some("season != Rainy")
                                );
                                if c.season == Season::Rainy {
                                    rainy_rejections.set(rainy_rejections.get() + 1);
                                }
                            }
                            rejected.insert(instance_id.clone());
                        }
                        TracePayload::EventFired { rule_id, .. } => {
                            if rule_id == "severe_drought" {
                                prop_assert_ne!(c.season, Season::Rainy);
                            }
                            fired.set(fired.get() + 1);
                        }
                        _ => {}
                    }
                }
                seen = events.len();
                for active in &sim.ledger().active_events {
                    prop_assert!(
                        !rejected.contains(&active.instance_id),
                        "rejected {} is active",
                        active.instance_id
                    );
                }
                for logged in &sim.ledger().fired_log {
                    prop_assert_eq!(&logged.critic_verdict, &EventVerdict::Accept);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let (rainy_rejections, fired) = (rainy_rejections.get(), fired.get());
    ensure(rainy_rejections > 0 && fired > 0, || {
        format!("degenerate sample: {rainy_rejections} rainy rejections, {fired} firings")
    })?;
    Ok(format!(
        "{CASES} randomized runs: {rainy_rejections} rainy drought rejections naming the predicate, {fired} firings, no rejected event ever active"
    ))
}

// 5 --------------------------------------------------------------------------

fn sparse_activation() -> Check {
    let (_, sink) = run_in_memory(&drought_town(), 7, 30).map_err(|e| e.to_string())?;
    let mut activated = 0;
    let mut issued = 0;
    for e in &sink.events {
        match &e.payload {
            TracePayload::ModuleActivated { module, .. } if module == "entertainment" => {
                activated += 1
            }
            TracePayload::DirectiveIssued { directive }
                if directive.source_module == "entertainment" =>
            {
                issued += 1
            }
            _ => {}
        }
    }
    ensure(activated == 0 && issued == 0, || {
        format!("entertainment activated {activated}x, issued {issued}")
    })?;
    ensure(
        drought_town()
            .domain_modules
            .iter()
            .any(|m| m.id == "entertainment"),
        || "scenario lacks an entertainment module".into(),
    )?;
    Ok("entertainment: 0 ModuleActivated, 0 DirectiveIssued".into())
}

// 6 --------------------------------------------------------------------------

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../core/scenarios/drought_town.json"
    );
    let mut files = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_cascade"))
            .args([
                "run",
                "--scenario",
                scenario,
                "--ticks",
                "30",
                "--seed",
                "7",
                "--trace",
            ])
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?
            .status;
        ensure(status.success(), || {
            format!("run exited {:?}", status.code())
        })?;
        files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    ensure(files[0] == files[1], || "trace files differ".into())?;

    let stub = StubDialogueProvider::default();
    let mut sim = Simulation::new(drought_town(), 7, 30, JsonlSink::new(Vec::new()))
        .map_err(|e| e.to_string())?;
    let chats = [(4, "mayor"), (10, "merchant_1"), (20, "farmer_2")];
    for tick in 1..=30 {
        sim.step().map_err(|e| e.to_string())?;
        for (_, npc) in chats.iter().filter(|(t, _)| *t == tick) {
            sim.request_dialogue(npc, "hello?", &stub)
                .map_err(|e| e.to_string())?
                .map_err(|e| e.to_string())?;
        }
    }
    ensure(sim.llm_calls() == 3, || {
        format!("{} calls", sim.llm_calls())
    })?;
    let (_, sink) = sim.finish().map_err(|e| e.to_string())?;
    let chatty = sink.into_inner().map_err(|e| e.to_string())?;
    let (_, quiet) = read_trace(files[0].as_slice()).map_err(|e| e.to_string())?;
    let (_, chatty) = read_trace(chatty.as_slice()).map_err(|e| e.to_string())?;
    ensure(
        non_dialogue_projection(&quiet) == non_dialogue_projection(&chatty),
        || "dialogue changed the world trace".into(),
    )?;
    Ok(format!(
        "two CLI traces byte-identical ({} bytes); 3-dialogue projection equals quiet run",
        files[0].len()
    ))
}

// 7 --------------------------------------------------------------------------

const TAG_POOL: [&str; 5] = ["Alpha", "Beta", "Gamma", "Delta", "Eps"];

fn tag_set(min: usize) -> impl Strategy<Value = BTreeSet<Tag>> {
    prop::collection::btree_set(0..TAG_POOL.len(), min..=TAG_POOL.len())
        .prop_map(|ix| ix.into_iter().map(|i| tag(TAG_POOL[i])).collect())
}

fn npc_with_tags(id: String, tags: BTreeSet<Tag>) -> NpcProfile {
    NpcProfile {
        id,
        name: None,
        role_tag: tags.iter().next().cloned().unwrap_or_else(|| tag("Alpha")),
        tags,
        personality: BTreeMap::new(),
        needs: BTreeMap::new(),
        local_state: [(WEALTH.to_string(), 1.0)].into(),
    }
}

fn directive(id: String, selector: TagSelector) -> Directive {
    Directive {
        id,
        source_module: "m".into(),
        cause_event: "e@1".into(),
        selector,
        action_id: "act".into(),
        parameters: BTreeMap::new(),
        base_priority: 0.5,
        risk: 0.1,
        issued_tick: 1,
        ttl_ticks: 5,
    }
}

fn broadcast_oracle(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(tag_set(0), 0..12),
        prop::collection::vec((any::<bool>(), tag_set(1)), 1..6),
    );
    runner
        .run(&strategy, |(npc_tags, selectors)| {
            let npcs: Vec<NpcProfile> = npc_tags
                .into_iter()
                .enumerate()
                .map(|(i, t)| npc_with_tags(format!("n{:02}", (i * 7) % 13), t))
                .collect();
            let directives: Vec<Directive> = selectors
                .into_iter()
                .enumerate()
                .map(|(i, (all, tags))| {
                    let mode = if all {
                        SelectorMode::All
                    } else {
                        SelectorMode::Any
                    };
                    directive(format!("D{i:08}"), TagSelector { mode, tags })
                })
                .collect();
            let records = broadcast(&directives, &npcs);
            prop_assert_eq!(records.len(), directives.len());
            for (d, r) in directives.iter().zip(&records) {
                let sel: BTreeSet<&str> = d.selector.tags.iter().map(Tag::as_str).collect();
                let mut expected: Vec<String> = npcs
                    .iter()
                    .filter(|n| {
                        let have: BTreeSet<&str> = n.tags.iter().map(Tag::as_str).collect();
                        match d.selector.mode {
                            SelectorMode::Any => sel.intersection(&have).next().is_some(),
                            SelectorMode::All => sel.difference(&have).next().is_none(),
                        }
                    })
                    .map(|n| n.id.clone())
                    .collect();
                expected.sort();
                prop_assert_eq!(&r.directive_id, &d.id);
                prop_assert_eq!(&r.matched_npc_ids, &expected);
            }
            Ok(())
        })
        .map_err(|e| format!("broadcast: {e}"))
}

#[derive(Debug, Clone)]
struct RuleSpec {
    id: usize,
    trigger: Vec<(usize, u8, Result<u8, f64>)>,
    cooldown: u64,
    active: bool,
    last_fired: Option<u64>,
}

const INTENSITIES: [f64; 7] = [0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 1.0];

fn comparator(code: u8) -> Comparator {
    [
        Comparator::Ge,
        Comparator::Le,
        Comparator::Gt,
        Comparator::Lt,
    ][code as usize % 4]
}

fn oracle_cmp<T: PartialOrd>(code: u8, a: T, b: T) -> bool {
    match code % 4 {
        0 => a >= b,
        1 => a <= b,
        2 => a > b,
        _ => a < b,
    }
}

fn rule_spec() -> impl Strategy<Value = RuleSpec> {
    let pred = (
        0usize..3,
        0u8..4,
        prop_oneof![
            (0u8..3).prop_map(Ok),
            prop::sample::select(INTENSITIES.to_vec()).prop_map(Err)
        ],
    );
    (
        0usize..6,
        prop::collection::vec(pred, 1..4),
        0u64..6,
        any::<bool>(),
        prop::option::of(0u64..=20),
    )
        .prop_map(|(id, trigger, cooldown, active, last_fired)| RuleSpec {
            id,
            trigger,
            cooldown,
            active,
            last_fired,
        })
}

fn ordinal(x: f64, elevated: f64, critical: f64) -> u8 {
    if x >= critical {
        2
    } else if x >= elevated {
        1
    } else {
        0
    }
}

fn evaluate_rules_oracle(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(
            prop_oneof![prop::sample::select(INTENSITIES.to_vec()), 0.0..=1.0f64],
            3,
        ),
        prop::collection::vec(rule_spec(), 0..6),
        0u64..=20,
        prop_oneof![Just((0.4, 0.8)), Just((0.3, 0.6)), Just((0.5, 0.9))],
    );
    runner
        .run(&strategy, |(values, specs, tick, (elevated, critical))| {
            let mut seen = BTreeSet::new();
            let specs: Vec<RuleSpec> = specs.into_iter().filter(|s| seen.insert(s.id)).collect();
            let names = ["v0", "v1", "v2"];
            let mut ledger = WorldLedger::new(
                Season::Dry,
                LevelThresholds { elevated, critical },
                names.iter().zip(&values).map(|(n, v)| (n.to_string(), *v)),
            );
            ledger.tick = tick;
            let levels = [Level::Normal, Level::Elevated, Level::Critical];
            let mut rules = Vec::new();
            for s in &specs {
                let id = format!("r{}", s.id);
                if s.active {
                    ledger.active_events.push(ActiveEvent {
                        instance_id: format!("{id}@0"),
                        rule_id: id.clone(),
                        name: id.clone(),
                        effects: Vec::new(),
                    });
                }
                if let Some(at) = s.last_fired.filter(|t| *t <= tick) {
                    ledger.fired_log.push(MacroEvent {
                        rule_id: id.clone(),
                        instance_id: format!("{id}@{at}"),
                        name: id.clone(),
                        fired_tick: at,
                        trigger_snapshot: BTreeMap::new(),
                        critic_verdict: EventVerdict::Accept,
                    });
                }
                rules.push(MacroEventRule {
                    id: id.clone(),
                    name: format!("Rule {}", s.id),
                    trigger: s
                        .trigger
                        .iter()
                        .map(|(v, c, t)| {
                            let threshold = match t {
                                Ok(l) => Threshold::Level(levels[*l as usize]),
                                Err(x) => Threshold::Intensity(*x),
                            };
                            VariablePredicate::new(names[*v], comparator(*c), threshold)
                        })
                        .collect(),
                    consistency_requirements: Vec::new(),
                    effects: Vec::new(),
                    cooldown_ticks: s.cooldown,
                });
            }

            let mut expected: Vec<String> = specs
                .iter()
                .filter(|s| {
                    s.trigger.iter().all(|(v, c, t)| match t {
                        Ok(l) => oracle_cmp(*c, ordinal(values[*v], elevated, critical), *l),
                        Err(x) => oracle_cmp(*c, values[*v], *x),
                    })
                })
                .filter(|s| !s.active)
                .filter(|s| match s.last_fired.filter(|t| *t <= tick) {
                    Some(at) => tick - at > s.cooldown,
                    None => true,
                })
                .map(|s| format!("r{}", s.id))
                .collect();
            expected.sort();

            let got = evaluate_rules(&ledger, &rules);
            let got_ids: Vec<String> = got.iter().map(|e| e.rule_id.clone()).collect();
            prop_assert_eq!(&got_ids, &expected);
            for e in &got {
                prop_assert_eq!(&e.instance_id, &format!("{}@{}", e.rule_id, tick));
                prop_assert_eq!(e.fired_tick, tick);
                prop_assert_eq!(&e.critic_verdict, &EventVerdict::Pending);
            }
            Ok(())
        })
        .map_err(|e| format!("evaluate_rules: {e}"))
}

fn breakdown(npc: &str, directive_id: String, total: f64, accepted: bool) -> UtilityBreakdown {
    UtilityBreakdown {
        npc_id: npc.into(),
        action_id: format!("act_{directive_id}"),
        directive_id,
        base_term: total,
        trait_term: 0.0,
        need_term: 0.0,
        risk_term: 0.0,
        total,
        threshold: 0.5,
        accepted,
    }
}

fn select_action_oracle(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = prop::collection::vec(
        (
            0u32..40,
            prop_oneof![(0u8..6).prop_map(|k| k as f64 * 0.25), -1.0..3.0f64],
            any::<bool>(),
        ),
        0..10,
    );
    let npc = npc_with_tags("n".into(), [tag("Alpha")].into());
    let ledger = WorldLedger::new(Season::Dry, LevelThresholds::default(), []);
    let tree = BehaviorTree::idle();
    runner
        .run(&strategy, |raw| {
            let mut ids = BTreeSet::new();
            let items: Vec<UtilityBreakdown> = raw
                .into_iter()
                .filter(|(id, ..)| ids.insert(*id))
                .map(|(id, total, accepted)| breakdown("n", format!("D{id:08}"), total, accepted))
                .collect();
            // brute force: scan everything, keep strictly better or equal-with-smaller-id
            let mut best: Option<&UtilityBreakdown> = None;
            for b in items.iter().filter(|b| b.accepted) {
                best = match best {
                    None => Some(b),
                    Some(cur) if b.total > cur.total => Some(b),
                    Some(cur) if b.total == cur.total && b.directive_id < cur.directive_id => {
                        Some(b)
                    }
                    keep => keep,
                };
            }
            let got = select_action(&npc, &items, &tree, &ledger).expect("idle tree always yields");
            match best {
                Some(b) => {
                    prop_assert_eq!(got.directive_id.as_deref(), Some(b.directive_id.as_str()));
                    prop_assert_eq!(&got.action_id, &b.action_id);
                }
                None => {
                    prop_assert_eq!(got.directive_id, None);
                    prop_assert_eq!(got.action_id.as_str(), "idle");
                }
            }
            Ok(())
        })
        .map_err(|e| format!("select_action: {e}"))
}

fn weights() -> impl Strategy<Value = UtilityWeights> {
    (
        0.0..3.0f64,
        0.0..3.0f64,
        0.0..3.0f64,
        0.0..3.0f64,
        -1.0..2.0f64,
    )
        .prop_map(
            |(w_base, w_trait, w_need, w_risk, threshold)| UtilityWeights {
                w_base,
                w_trait,
                w_need,
                w_risk,
                threshold,
            },
        )
}

fn utility_recompute(runner: &mut TestRunner) -> Result<u64, String> {
    let strategy = (weights(), 1usize..25, any::<u64>(), 1u64..35);
    let checked = Cell::new(0u64);
    runner
        .run(&strategy, |(w, n, seed, ticks)| {
            let scenario = Scenario {
                utility_weights: w,
                ..drought_town().with_population(n)
            };
            let (_, sink) = run_in_memory(&scenario, seed, ticks)
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            let meta = sink.meta.as_ref().expect("header written");
            for e in &sink.events {
                if let TracePayload::UtilityEvaluated(b) = &e.payload {
                    let again = meta.utility_weights.w_base * b.base_term
                        + meta.utility_weights.w_trait * b.trait_term
                        + meta.utility_weights.w_need * b.need_term
                        - meta.utility_weights.w_risk * b.risk_term;
                    prop_assert_eq!(again.to_bits(), b.total.to_bits());
                    prop_assert_eq!(b.accepted, b.total >= meta.utility_weights.threshold);
                    prop_assert!((-1.0..=1.0).contains(&b.trait_term));
                    prop_assert!((0.0..=1.0).contains(&b.need_term));
                    checked.set(checked.get() + 1);
                }
            }
            Ok(())
        })
        .map_err(|e| format!("utility recompute: {e}"))?;
    Ok(checked.get())
}

fn hysteresis_oracle(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (
        1.0..20.0f64,
        0.0..5.0f64,
        prop::option::of(0.0..4.0f64),
        prop::option::of(0.0..4.0f64),
        prop::collection::vec(-1.0..1.0f64, 1..60),
        0.0..40.0f64,
    );
    runner
        .run(
            &strategy,
            |(down_at, gap, down_margin, up_margin, steps, start)| {
                let up_at = down_at + gap;
                let rules = vec![
                    TagMigrationRule {
                        from_tag: tag("Merchant"),
                        to_tag: tag("Beggar"),
                        predicate: MigrationPredicate {
                            field: WEALTH.into(),
                            cmp: Comparator::Lt,
                            threshold: down_at,
                        },
                        hysteresis_margin: down_margin,
                    },
                    TagMigrationRule {
                        from_tag: tag("Beggar"),
                        to_tag: tag("Merchant"),
                        predicate: MigrationPredicate {
                            field: WEALTH.into(),
                            cmp: Comparator::Ge,
                            threshold: up_at,
                        },
                        hysteresis_margin: up_margin,
                    },
                ];
                let m_down = down_margin.unwrap_or(0.1 * down_at);
                let m_up = up_margin.unwrap_or(0.1 * up_at);
                // dead band: leave Merchant only strictly below, re-enter only strictly above
                let low = if m_up > 0.0 { down_at - m_up } else { down_at };
                let high = up_at + m_down;

                let mut npc = npc_with_tags("m".into(), [tag("Merchant")].into());
                npc.role_tag = tag("Merchant");
                let mut wealth = start;
                let mut last_flip: Option<(Tag, f64)> = None;
                for step in steps {
                    // oscillate around the band centre
                    wealth = (wealth + step * (high - low + 1.0)).max(0.0);
                    npc.local_state.insert(WEALTH.into(), wealth);
                    let was = npc.role_tag.clone();
                    let (next, migration) = migrate_tags(npc, &rules);
                    npc = next;
                    prop_assert!(npc.tags.contains(&npc.role_tag));
                    prop_assert_eq!(npc.tags.len(), 1);
                    let expect_flip = match was.as_str() {
                        "Merchant" => {
                            if m_up > 0.0 {
                                wealth < low
                            } else {
                                wealth < down_at
                            }
                        }
                        _ => {
                            if m_down > 0.0 {
                                wealth > high
                            } else {
                                wealth >= up_at
                            }
                        }
                    };
                    prop_assert_eq!(
                        migration.is_some(),
                        expect_flip,
                        "wealth {} from {}",
                        wealth,
                        was
                    );
                    if let Some(m) = migration {
                        prop_assert_eq!(&m.from_tag, &was);
                        if let Some((prev_to, prev_value)) = &last_flip {
                            prop_assert_eq!(prev_to, &m.from_tag);
                            // opposite flips are separated by at least the band width
                            prop_assert!((m.value - prev_value).abs() >= high - low);
                        }
                        last_flip = Some((m.to_tag, m.value));
                    }
                }
                Ok(())
            },
        )
        .map_err(|e| format!("hysteresis: {e}"))
}

fn oracle_suite() -> Check {
    let start = Instant::now();
    broadcast_oracle(&mut runner())?;
    evaluate_rules_oracle(&mut runner())?;
    select_action_oracle(&mut runner())?;
    let breakdowns = utility_recompute(&mut runner())?;
    hysteresis_oracle(&mut runner())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || {
        format!("suite took {elapsed:?}")
    })?;
    Ok(format!(
        "5 suites x {CASES} cases ({breakdowns} breakdowns recomputed) in {:.1} s",
        elapsed.as_secs_f64()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("golden drought mapping", golden_mapping),
        ("zero-LLM main loop", zero_llm_loop),
        ("directive-count independence", directive_count_independence),
        ("causal-critic gate", critic_gate),
        ("sparse activation", sparse_activation),
        ("determinism", determinism),
        ("oracle equivalence suite", oracle_suite),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
