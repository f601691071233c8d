//! Command-line front end.
//!
//! `simulate` runs one scenario across the selected architectures and seeds
//! and writes Markdown/CSV/JSON reports; `compare` replays written reports
//! against a stored reference table and exits non-zero when any cell is out
//! of tolerance.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use continuum_sim::engine::run_simulation_traced;
use continuum_sim::model::Architecture;
use continuum_sim::report::{
    compare_to_reference, emit_report, load_scenario, parse_architectures, render_comparison,
    run_experiment, ExperimentReport, ExperimentSpec, OutageSpec, ReportFormat,
};
use continuum_sim::workload::write_workload_csv;

#[derive(Parser)]
#[command(
    name = "continuum-sim",
    version,
    about = "Deterministic comparison of cloud-centric, gateway-edge, and device-first \
             deployments across desk-scale IoT scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an architecture sweep and write report files.
    Simulate(SimulateArgs),
    /// Check a directory of reports against a reference table.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Shipped preset (drone_fleet, sensor_network, worker_safety) or a path
    /// to a scenario JSON document.
    #[arg(long)]
    scenario: String,
    /// Architectures to simulate: cloud, gateway, dfc, or all.
    #[arg(long, default_value = "all", value_delimiter = ',')]
    arch: Vec<String>,
    /// Independent replications per architecture (replication i uses seed+i).
    #[arg(long, default_value_t = 10)]
    runs: u32,
    /// Base seed for the sweep.
    #[arg(long, env = "CONTINUUM_SIM_SEED", default_value_t = 42)]
    seed: u64,
    /// Override the scenario's configured horizon, in seconds.
    #[arg(long)]
    duration_s: Option<f64>,
    /// none, unstable, down, or a path to a JSON outage schedule.
    #[arg(long, default_value = "none")]
    outage: String,
    /// Directory the report files are written into.
    #[arg(long, default_value = "out")]
    output: PathBuf,
    /// Report formats to write: md, csv, json.
    #[arg(long, default_value = "md,csv,json", value_delimiter = ',')]
    format: Vec<String>,
    /// Worker threads for the sweep; 1 runs sequentially.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Also write a per-task lifecycle CSV for the base-seed run of each
    /// architecture (suffixed with the architecture when several run).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Also write the base-seed task stream as CSV.
    #[arg(long)]
    dump_workload: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Directory holding report_*.json files from `simulate`.
    #[arg(long)]
    report: PathBuf,
    /// Reference table with expected values and tolerances.
    #[arg(long, default_value = "refs/paper_tables.json")]
    reference: PathBuf,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Compare(args) => compare(args),
    }
}

fn simulate(args: SimulateArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let architectures = parse_architectures(&args.arch)?;
    let formats = args
        .format
        .iter()
        .map(|f| ReportFormat::parse(f))
        .collect::<Result<Vec<_>, _>>()?;
    let outage = OutageSpec::parse(&args.outage)?;

    if let Some(path) = &args.dump_workload {
        let mut cfg = load_scenario(&args.scenario)?;
        if let Some(d) = args.duration_s {
            cfg.duration_s = d;
        }
        let mut out = BufWriter::new(File::create(path)?);
        let rows = write_workload_csv(&cfg, args.seed, None, &mut out)?;
        println!("wrote {rows} workload rows to {}", path.display());
    }

    let spec = ExperimentSpec {
        scenario: args.scenario.clone(),
        architectures: architectures.clone(),
        runs: args.runs,
        base_seed: args.seed,
        duration_s: args.duration_s,
        outage: outage.clone(),
        parallel: args.parallel,
    };
    let report = run_experiment(&spec)?;

    for path in emit_report(&report, &formats, &args.output)? {
        println!("wrote {}", path.display());
    }

    if let Some(base) = &args.trace {
        let mut cfg = load_scenario(&args.scenario)?;
        if let Some(d) = args.duration_s {
            cfg.duration_s = d;
        }
        outage.apply(&mut cfg)?;
        for &arch in &architectures {
            let path = trace_path(base, arch, architectures.len() == 1);
            let mut out = BufWriter::new(File::create(&path)?);
            run_simulation_traced(&cfg, arch, args.seed, &mut out)?;
            println!("wrote {}", path.display());
        }
    }

    print_summary(&report);
    Ok(ExitCode::SUCCESS)
}

fn trace_path(base: &Path, arch: Architecture, solo: bool) -> PathBuf {
    if solo {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}_{}.{ext}", arch.key()))
}

fn print_summary(report: &ExperimentReport) {
    println!(
        "\n{} · outage {} · {} run(s) × {} s · base seed {}",
        report.scenario, report.outage, report.runs, report.duration_s, report.base_seed
    );
    for s in &report.architectures {
        let ci = |d: &Option<continuum_sim::stats::SummaryStatistics>| {
            d.as_ref().map_or(String::new(), |d| format!(" ±{:.3}", d.ci95_half_width))
        };
        println!(
            "  {:<13} latency {:.3}{} ms · energy {:.3}{} Wh · cost ${:.2}{}/yr",
            s.label,
            s.latency_ms.mean,
            ci(&s.latency_ms.dispersion),
            s.energy_wh.mean,
            ci(&s.energy_wh.dispersion),
            s.annual_cost_usd.mean,
            ci(&s.annual_cost_usd.dispersion)
        );
        if let Some(c) = &s.capability {
            println!("  {:<13} capability {:.4}{}", "", c.mean, ci(&c.dispersion));
        }
    }
    if let Some(reason) = &report.comparisons_skipped {
        println!("  significance: skipped ({reason})");
    } else {
        for c in &report.comparisons {
            println!(
                "  {} vs {} on {}: p = {:.4e}{}",
                c.a.key(),
                c.b.key(),
                c.metric_id,
                c.result.p_value,
                if c.result.significant { " (significant)" } else { "" }
            );
        }
    }
}

fn compare(args: CompareArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let cmp = compare_to_reference(&args.report, &args.reference)?;
    print!("{}", render_comparison(&cmp));
    Ok(if cmp.all_pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
