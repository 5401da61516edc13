//! `cascade`: run scenarios, benchmark population scaling, render reports.

mod report;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cascade_core::cost::{build_cost_report, CostReport, DEFAULT_TOKENS_PER_CALL};
use cascade_core::engine::{bench, Simulation};
use cascade_core::scenario::{drought_town, load_scenario_file, Scenario};
use cascade_core::trace::{read_trace, JsonlSink, TraceKind};
use cascade_core::{CascadeError, Result};

const BENCH_FAILED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "cascade",
    version,
    about = "Tag-routed three-layer town simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Baseline {
    Off,
    FullGenerative,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its JSONL trace.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
        ticks: u64,
        /// Defaults to the scenario's `seed_default`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = Baseline::Off)]
        baseline: Baseline,
        /// Replicate the roster to this many NPCs.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        npcs: Option<u64>,
    },
    /// Run a scenario at several population sizes and check count invariants.
    Bench {
        #[arg(long, value_delimiter = ',', required = true)]
        npcs: Vec<usize>,
        #[arg(long, default_value_t = 30)]
        ticks: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to the built-in drought town.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Print the cost report and final-tick NPC actions of a trace.
    Report {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOKENS_PER_CALL)]
        tokens_per_call: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            scenario,
            ticks,
            seed,
            trace,
            baseline,
            npcs,
        } => cmd_run(scenario, ticks, seed, trace, baseline, npcs).map(|()| ExitCode::SUCCESS),
        Command::Bench {
            npcs,
            ticks,
            seed,
            scenario,
        } => cmd_bench(&npcs, ticks, seed, scenario),
        Command::Report {
            trace,
            tokens_per_call,
        } => cmd_report(trace, tokens_per_call).map(|()| ExitCode::SUCCESS),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(e.exit_code() as u8)
    })
}

fn cmd_run(
    scenario_path: PathBuf,
    ticks: u64,
    seed: Option<u64>,
    trace: PathBuf,
    baseline: Baseline,
    npcs: Option<u64>,
) -> Result<()> {
    let mut scenario = load_scenario_file(&scenario_path)?;
    if let Some(n) = npcs {
        scenario = scenario.with_population(n as usize);
    }
    let seed = seed.unwrap_or(scenario.seed_default);
    let npc_count = scenario.npcs.len();
    let file = File::create(&trace).map_err(CascadeError::Sink)?;
    let mut sim = Simulation::new(scenario, seed, ticks, JsonlSink::new(BufWriter::new(file)))?;
    sim.run(ticks)?;
    let (stats, _) = sim.finish()?;
    println!("{}", stats.summary(npc_count));
    if baseline == Baseline::FullGenerative {
        let calls = stats.count(TraceKind::DialogueRequested);
        let report =
            CostReport::from_counts(calls, npc_count as u64, ticks, DEFAULT_TOKENS_PER_CALL);
        println!("{report}");
    }
    Ok(())
}

fn cmd_bench(
    scales: &[usize],
    ticks: u64,
    seed: Option<u64>,
    scenario: Option<PathBuf>,
) -> Result<ExitCode> {
    let scenario: Scenario = match scenario {
        Some(path) => load_scenario_file(path)?,
        None => drought_town(),
    };
    let seed = seed.unwrap_or(scenario.seed_default);
    let rows = bench(&scenario, scales, ticks, seed)?;
    print!("{}", report::bench_table(&rows));
    let failures = report::bench_failures(&rows);
    if failures.is_empty() {
        println!("directive count constant across scales; utility evaluations match tag census");
        return Ok(ExitCode::SUCCESS);
    }
    for f in &failures {
        eprintln!("bench assertion failed: {f}");
    }
    Ok(ExitCode::from(BENCH_FAILED))
}

fn cmd_report(trace: PathBuf, tokens_per_call: u64) -> Result<()> {
    let file = File::open(&trace).map_err(|source| CascadeError::Input {
        path: trace.clone(),
        source,
    })?;
    let (meta, events) = read_trace(BufReader::new(file))?;
    report::check_complete(&meta, &events)?;
    let cost = build_cost_report(&events, meta.npc_count as u64, meta.ticks, tokens_per_call);
    println!("scenario {} seed {}", meta.scenario, meta.seed);
    println!("{cost}");
    println!();
    print!("{}", report::npc_table(&meta, &events));
    Ok(())
}
