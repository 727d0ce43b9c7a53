//! Command-line experiment runner for the routing-cost tree pipelines.

mod config;
mod experiment;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mrct_core::graph::{generate, load_edge_list, save_edge_list, TerminalSet};
use mrct_core::oracle;

use config::{parse_graph_kind, ExperimentConfig, TerminalSpec};
use report::ExperimentReport;

#[derive(Parser)]
#[command(name = "mrct", about = "CONGEST simulation of routing cost tree approximations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph and write it in edge-list format.
    Gen(GenArgs),
    /// Run a seeded experiment and write a JSON report.
    Run(RunArgs),
    /// Print oracle values (routing costs, SSRC, exact MRCT) for a graph file.
    Oracle(OracleArgs),
    /// Convert a JSON report into plot-data CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// clique | path | grid | random_connected
    #[arg(long, default_value = "random_connected")]
    graph: String,
    #[arg(long)]
    n: u32,
    #[arg(long, default_value_t = 0.3)]
    p: f64,
    #[arg(long, default_value_t = 1)]
    max_delay: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// key = value config file; flags below override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    max_delay: Option<u64>,
    /// all | a terminal count
    #[arg(long)]
    terminals: Option<String>,
    /// det | rand | both
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u32>,
    /// Also compare against the exact S-MRCT (n <= 9 only).
    #[arg(long)]
    exact: bool,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Edge-list file as produced by `gen`.
    #[arg(long)]
    graph_file: PathBuf,
    /// all | a terminal count
    #[arg(long, default_value = "all")]
    terminals: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON report produced by `run`.
    #[arg(long = "in")]
    input: PathBuf,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn write_or_print(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let kind = parse_graph_kind(&args.graph)?;
    let graph = generate(kind, args.n, args.p, args.seed, args.max_delay)?;
    write_or_print(&args.out, &save_edge_list(&graph))
}

fn apply_overrides(cfg: &mut ExperimentConfig, args: &RunArgs) -> Result<()> {
    if let Some(v) = &args.graph {
        cfg.set("graph", v)?;
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.p {
        cfg.p = v;
    }
    if let Some(v) = args.max_delay {
        cfg.max_delay = v;
    }
    if let Some(v) = &args.terminals {
        cfg.terminals = v.parse()?;
    }
    if let Some(v) = &args.mode {
        cfg.mode = v.parse()?;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if args.exact {
        cfg.exact = true;
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<bool> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    apply_overrides(&mut cfg, args)?;
    let report = experiment::run_experiment(&cfg)?;
    let json = serde_json::to_string_pretty(&report)?;
    write_or_print(&args.out, &format!("{json}\n"))?;
    let agg = &report.aggregate;
    eprintln!(
        "{} trials: max ratio {:.6}, {} bound violations, {} round-budget violations, max edge bits {}",
        agg.trials, agg.max_ratio, agg.bound_violations, agg.round_budget_violations, agg.max_edge_bits
    );
    Ok(agg.bound_violations == 0 && agg.round_budget_violations == 0)
}

fn cmd_oracle(args: &OracleArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.graph_file)
        .with_context(|| format!("reading {}", args.graph_file.display()))?;
    let graph = load_edge_list(&text)?;
    let spec: TerminalSpec = args.terminals.parse()?;
    let terminals = match spec {
        TerminalSpec::All => TerminalSet::all(&graph),
        TerminalSpec::Random(k) => {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut ids: Vec<u32> = graph.nodes().collect();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed ^ 0x7465_726d);
            ids.shuffle(&mut rng);
            ids.truncate(k as usize);
            TerminalSet::new(&graph, ids)?
        }
    };
    let rc_graph = oracle::rc_graph(&graph, &terminals);
    let ssrc: serde_json::Map<String, serde_json::Value> = terminals
        .iter()
        .map(|v| {
            (
                v.to_string(),
                json!(oracle::ssrc_exact(&graph, &terminals, v)),
            )
        })
        .collect();
    let mrct = oracle::mrct_exact(&graph, &terminals).ok();
    let out = json!({
        "n": graph.node_count(),
        "m": graph.edge_count(),
        "d_omega": graph.diameter(),
        "terminals": terminals.iter().collect::<Vec<_>>(),
        "rc_graph": rc_graph,
        "ssrc": ssrc,
        "mrct_exact": mrct.as_ref().map(|(_, cost)| cost),
        "mrct_exact_edges": mrct.as_ref().map(|(edges, _)| edges),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let parsed: ExperimentReport = serde_json::from_str(&text).context("parsing report JSON")?;
    let csv = report::emit_plotdata(&parsed);
    // the emitted rows must reproduce the report's own aggregates
    let rows = report::parse_plotdata(&csv)?;
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0f64, f64::max);
    anyhow::ensure!(
        rows.len() == parsed.trials.len() && max_ratio == parsed.aggregate.max_ratio,
        "CSV round-trip does not reproduce the report aggregates"
    );
    write_or_print(&args.csv, &csv)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gen(args) => cmd_gen(args).map(|()| true),
        Command::Run(args) => cmd_run(args),
        Command::Oracle(args) => cmd_oracle(args).map(|()| true),
        Command::Report(args) => cmd_report(args).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("invariant violations detected");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
