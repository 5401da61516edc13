//! Scenario files: strict JSON schema, cross-reference validation and
//! roster scaling.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::director::DriftSchedule;
use crate::error::{CascadeError, Result};
use crate::hub::DomainModuleSpec;
use crate::model::{
    LedgerPredicate, LevelThresholds, MacroEventRule, NpcProfile, Season, Tag, Violation,
    WorldLedger,
};
use crate::npc::{ActionBinding, ActionCatalog, BehaviorTree, TagMigrationRule, UtilityWeights};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// The shipped drought town: ten NPCs facing a dry-season water crisis.
pub const DROUGHT_TOWN: &str = include_str!("../scenarios/drought_town.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioMeta {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerInit {
    pub season: Season,
    pub variables: BTreeMap<String, f64>,
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub meta: ScenarioMeta,
    pub ledger_init: LedgerInit,
    #[serde(default)]
    pub level_thresholds: LevelThresholds,
    #[serde(default)]
    pub drift_schedule: DriftSchedule,
    #[serde(default)]
    pub macro_rules: Vec<MacroEventRule>,
    #[serde(default)]
    pub domain_modules: Vec<DomainModuleSpec>,
    pub action_catalog: Vec<ActionBinding>,
    #[serde(default = "BehaviorTree::idle")]
    pub behavior_tree: BehaviorTree,
    /// Disposition tag -> personality weights, e.g. `Greedy -> {greed: 0.8}`.
    #[serde(default)]
    pub disposition_table: BTreeMap<Tag, BTreeMap<String, f64>>,
    pub npcs: Vec<NpcProfile>,
    #[serde(default)]
    pub migration_rules: Vec<TagMigrationRule>,
    #[serde(default)]
    pub utility_weights: UtilityWeights,
    #[serde(default)]
    pub seed_default: u64,
}

/// A validated scenario. NPCs are sorted by id and carry their resolved
/// personality (disposition table first, explicit weights on top).
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub meta: ScenarioMeta,
    pub ledger_init: LedgerInit,
    pub level_thresholds: LevelThresholds,
    pub drift_schedule: DriftSchedule,
    pub macro_rules: Vec<MacroEventRule>,
    pub domain_modules: Vec<DomainModuleSpec>,
    pub action_catalog: ActionCatalog,
    pub behavior_tree: BehaviorTree,
    pub disposition_table: BTreeMap<Tag, BTreeMap<String, f64>>,
    pub npcs: Vec<NpcProfile>,
    pub migration_rules: Vec<TagMigrationRule>,
    pub utility_weights: UtilityWeights,
    pub seed_default: u64,
}

pub fn load_scenario(source: &str) -> Result<Scenario> {
    let file: ScenarioFile =
        serde_json::from_str(source).map_err(|e| CascadeError::ScenarioParse(e.to_string()))?;
    Scenario::from_file(file)
}

pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CascadeError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    load_scenario(&text)
}

pub fn drought_town() -> Scenario {
    load_scenario(DROUGHT_TOWN).expect("shipped scenario is valid")
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self> {
        let mut file = file;
        for npc in &mut file.npcs {
            npc.personality = resolve_personality(npc, &file.disposition_table);
        }
        let violations = validate(&file);
        if !violations.is_empty() {
            return Err(CascadeError::Validation(violations));
        }
        let mut npcs = file.npcs;
        npcs.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Self {
            meta: file.meta,
            ledger_init: file.ledger_init,
            level_thresholds: file.level_thresholds,
            drift_schedule: file.drift_schedule,
            macro_rules: file.macro_rules,
            domain_modules: file.domain_modules,
            action_catalog: ActionCatalog::new(file.action_catalog),
            behavior_tree: file.behavior_tree,
            disposition_table: file.disposition_table,
            npcs,
            migration_rules: file.migration_rules,
            utility_weights: file.utility_weights,
            seed_default: file.seed_default,
        })
    }

    pub fn initial_ledger(&self) -> WorldLedger {
        WorldLedger::new(
            self.ledger_init.season,
            self.level_thresholds,
            self.ledger_init
                .variables
                .iter()
                .map(|(k, v)| (k.clone(), *v)),
        )
    }

    pub fn rule(&self, id: &str) -> Option<&MacroEventRule> {
        self.macro_rules.iter().find(|r| r.id == id)
    }

    /// Replicates the roster to exactly `n` NPCs. Copy `k > 0` of an NPC gets
    /// the id suffix `_r{k}`; `n` equal to the roster size is the identity.
    pub fn with_population(&self, n: usize) -> Scenario {
        let base = &self.npcs;
        let mut npcs = Vec::with_capacity(n);
        if !base.is_empty() {
            for i in 0..n {
                let template = &base[i % base.len()];
                let copy = i / base.len();
                let mut npc = template.clone();
                if copy > 0 {
                    npc.id = format!("{}_r{copy:04}", template.id);
                    npc.name = Some(format!("{} #{copy}", template.display_name()));
                }
                npcs.push(npc);
            }
        }
        npcs.sort_by(|a, b| a.id.cmp(&b.id));
        Scenario {
            npcs,
            ..self.clone()
        }
    }
}

fn resolve_personality(
    npc: &NpcProfile,
    table: &BTreeMap<Tag, BTreeMap<String, f64>>,
) -> BTreeMap<String, f64> {
    let mut resolved = BTreeMap::new();
    for tag in &npc.tags {
        if let Some(weights) = table.get(tag) {
            resolved.extend(weights.iter().map(|(k, v)| (k.clone(), *v)));
        }
    }
    resolved.extend(npc.personality.iter().map(|(k, v)| (k.clone(), *v)));
    resolved
}

struct Checker<'a> {
    out: Vec<Violation>,
    variables: BTreeSet<&'a str>,
    actions: BTreeSet<&'a str>,
    rules: BTreeSet<&'a str>,
    tags: BTreeSet<&'a Tag>,
}

impl<'a> Checker<'a> {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.out.push(Violation::new(path, message));
    }

    fn variable(&mut self, path: String, name: &str) {
        if !self.variables.contains(name) {
            self.push(path, format!("unknown variable '{name}'"));
        }
    }

    fn action(&mut self, path: String, id: &str) {
        if !self.actions.contains(id) {
            self.push(path, format!("unknown action '{id}'"));
        }
    }

    fn ledger_predicate(&mut self, path: String, p: &LedgerPredicate) {
        if let LedgerPredicate::Variable(v) = p {
            self.variable(path, &v.variable);
        }
    }

    fn unit(&mut self, path: String, x: f64) {
        if !(0.0..=1.0).contains(&x) {
            self.push(path, "out of [0,1]");
        }
    }
}

fn duplicates<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = BTreeSet::new();
    ids.filter(|id| !seen.insert(*id)).collect()
}

fn validate(file: &ScenarioFile) -> Vec<Violation> {
    let mut tags: BTreeSet<&Tag> = file.npcs.iter().flat_map(|n| n.tags.iter()).collect();
    tags.extend(file.disposition_table.keys());
    for r in &file.migration_rules {
        tags.insert(&r.from_tag);
        tags.insert(&r.to_tag);
    }
    let mut c = Checker {
        out: Vec::new(),
        variables: file
            .ledger_init
            .variables
            .keys()
            .map(String::as_str)
            .collect(),
        actions: file
            .action_catalog
            .iter()
            .map(|a| a.action_id.as_str())
            .collect(),
        rules: file.macro_rules.iter().map(|r| r.id.as_str()).collect(),
        tags,
    };

    if file.schema_version != SCENARIO_SCHEMA_VERSION {
        c.push(
            "schema_version",
            format!(
                "unsupported version {}, expected {SCENARIO_SCHEMA_VERSION}",
                file.schema_version
            ),
        );
    }
    if file.meta.name.trim().is_empty() {
        c.push("meta.name", "must be non-empty");
    }
    if !file.level_thresholds.is_well_formed() {
        c.push("level_thresholds", "require 0 < elevated < critical <= 1");
    }
    for (name, v) in &file.ledger_init.variables {
        c.unit(format!("ledger_init.variables.{name}"), *v);
    }

    for (i, d) in file.drift_schedule.entries.iter().enumerate() {
        let path = format!("drift_schedule[{i}]");
        c.variable(format!("{path}.variable"), &d.variable);
        if d.start_tick > d.end_tick {
            c.push(format!("{path}.start_tick"), "must be <= end_tick");
        }
        if !(0.0..).contains(&d.noise) {
            c.push(format!("{path}.noise"), "must be >= 0");
        }
    }

    for id in duplicates(file.macro_rules.iter().map(|r| r.id.as_str())) {
        c.push("macro_rules", format!("duplicate rule id '{id}'"));
    }
    for (i, rule) in file.macro_rules.iter().enumerate() {
        let path = format!("macro_rules[{i}]");
        if rule.trigger.is_empty() {
            c.push(format!("{path}.trigger"), "must be non-empty");
        }
        for (j, p) in rule.trigger.iter().enumerate() {
            c.variable(format!("{path}.trigger[{j}].variable"), &p.variable);
        }
        for (j, p) in rule.consistency_requirements.iter().enumerate() {
            c.ledger_predicate(format!("{path}.consistency_requirements[{j}]"), p);
        }
        for (j, e) in rule.effects.iter().enumerate() {
            c.variable(format!("{path}.effects[{j}].variable"), &e.variable);
            if e.duration_ticks < 1 {
                c.push(
                    format!("{path}.effects[{j}].duration_ticks"),
                    "must be >= 1",
                );
            }
        }
    }

    for id in duplicates(file.domain_modules.iter().map(|m| m.id.as_str())) {
        c.push("domain_modules", format!("duplicate module id '{id}'"));
    }
    for (i, module) in file.domain_modules.iter().enumerate() {
        let path = format!("domain_modules[{i}]");
        if module.activation.is_empty() {
            c.push(format!("{path}.activation"), "must be non-empty");
        }
        for (j, m) in module.activation.iter().enumerate() {
            let mpath = format!("{path}.activation[{j}]");
            if m.is_empty() {
                c.push(mpath.clone(), "matcher needs rule_id or variable");
            }
            if let Some(rule_id) = &m.rule_id {
                if !c.rules.contains(rule_id.as_str()) {
                    c.push(
                        format!("{mpath}.rule_id"),
                        format!("unknown rule '{rule_id}'"),
                    );
                }
            }
            if let Some(p) = &m.variable {
                c.variable(format!("{mpath}.variable"), &p.variable);
            }
        }
        for (j, t) in module.compile_rules.iter().enumerate() {
            let tpath = format!("{path}.compile_rules[{j}]");
            if let Some(cond) = &t.condition {
                c.ledger_predicate(format!("{tpath}.condition"), cond);
            }
            if t.tag_selector.tags.is_empty() {
                c.push(format!("{tpath}.tag_selector.tags"), "must be non-empty");
            }
            for tag in &t.tag_selector.tags {
                if !c.tags.contains(tag) {
                    c.push(
                        format!("{tpath}.tag_selector.tags"),
                        format!("unknown tag '{tag}'"),
                    );
                }
            }
            c.action(format!("{tpath}.action_id"), &t.action_id);
            for (name, expr) in &t.parameters {
                if let Some(var) = expr.variable() {
                    c.variable(format!("{tpath}.parameters.{name}"), var);
                }
            }
            c.unit(format!("{tpath}.base_priority"), t.base_priority);
            c.unit(format!("{tpath}.risk"), t.risk);
            if t.ttl_ticks < 1 {
                c.push(format!("{tpath}.ttl_ticks"), "must be >= 1");
            }
        }
    }

    for id in duplicates(file.action_catalog.iter().map(|a| a.action_id.as_str())) {
        c.push("action_catalog", format!("duplicate action id '{id}'"));
    }
    for (i, a) in file.action_catalog.iter().enumerate() {
        let path = format!("action_catalog[{i}]");
        for (name, sign) in &a.required_trait_affinities {
            if *sign != 1 && *sign != -1 {
                c.push(
                    format!("{path}.required_trait_affinities.{name}"),
                    "must be +1 or -1",
                );
            }
        }
        for (name, relief) in &a.satisfies_needs {
            c.unit(format!("{path}.satisfies_needs.{name}"), *relief);
        }
    }

    let catalog = ActionCatalog::new(file.action_catalog.iter().cloned());
    for v in file.behavior_tree.validate(&catalog) {
        c.out.push(v.nested("behavior_tree"));
    }
    for var in file.behavior_tree.variables() {
        c.variable("behavior_tree".into(), var);
    }

    for (tag, weights) in &file.disposition_table {
        for (name, w) in weights {
            if !(-1.0..=1.0).contains(w) {
                c.push(format!("disposition_table.{tag}.{name}"), "out of [-1,1]");
            }
        }
    }

    if file.npcs.is_empty() {
        c.push("npcs", "must be non-empty");
    }
    for id in duplicates(file.npcs.iter().map(|n| n.id.as_str())) {
        c.push("npcs", format!("duplicate npc id '{id}'"));
    }
    for (i, npc) in file.npcs.iter().enumerate() {
        for v in npc.validate() {
            c.out.push(v.nested(&format!("npcs[{i}]")));
        }
    }

    for (i, r) in file.migration_rules.iter().enumerate() {
        let path = format!("migration_rules[{i}]");
        if r.from_tag == r.to_tag {
            c.push(path.clone(), "from_tag must differ from to_tag");
        }
        if r.hysteresis_margin.is_some_and(|m| !(0.0..).contains(&m)) {
            c.push(format!("{path}.hysteresis_margin"), "must be >= 0");
        }
    }

    if !file.utility_weights.is_well_formed() {
        c.push(
            "utility_weights",
            "weights must be >= 0 and threshold finite",
        );
    }
    c.out
}
