//! Experiment orchestration and reporting.
//!
//! This module turns a sweep description — one scenario, a set of
//! architectures, `runs` seeds starting at `base_seed` — into an
//! [`ExperimentReport`]: per-architecture summary statistics with 95%
//! confidence intervals, Welch t-tests of the device-first architecture
//! against each baseline, closed-form predictions for the same quantities,
//! and the calibration constants the numbers were produced under.
//!
//! Reports are written as Markdown (for reading), CSV (for spreadsheets),
//! and JSON (the complete record). The JSON file is the source of truth:
//! every number in the Markdown and CSV renderings is read from a report
//! field, never recomputed at formatting time, and identical invocations
//! produce byte-identical files. [`compare_to_reference`] replays written
//! reports against a stored table of expected values with pinned
//! tolerances, which is how published results are checked end to end.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run_simulation, QueueWarning, RunMetrics};
use crate::metrics::{
    account_cost, account_energy, predict_breakdown, predict_energy_wh, predict_mean_latency_ms,
    CostBreakdown, EnergyBreakdown, LatencyBreakdown,
};
use crate::model::{
    Architecture, ArchitectureTable, LinkTable, ModelError, OutageMode, OutageWindow,
    PricingTable, ScenarioConfig, ScenarioName, PRESET_NAMES,
};
use crate::stats::{named_summary, welch_t_test, StatsError, SummaryStatistics, TTestResult};

/// Everything that can go wrong while running or checking an experiment.
#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("no architectures selected")]
    NoArchitectures,
    #[error("unknown architecture `{0}` (expected cloud, gateway, dfc, or all)")]
    UnknownArchitecture(String),
    #[error("runs must be at least 1")]
    NoRuns,
    #[error("invalid outage spec: {0}")]
    InvalidOutage(String),
    #[error("failed to start worker pool: {0}")]
    Parallel(String),
    #[error("no report_*.json files found in `{0}`")]
    EmptyReportDir(String),
    #[error("reference expects `{0}`, which no report in the directory provides")]
    MissingReferenceMetric(String),
}

/// Network degradation applied uniformly to every run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutageSpec {
    /// Keep whatever outage windows the scenario file declares.
    AsConfigured,
    /// One window of the given mode covering the entire run.
    FullRun(OutageMode),
    /// Replace the scenario's windows with an explicit schedule.
    Schedule(Vec<OutageWindow>),
}

impl OutageSpec {
    /// Tag used in report file names and reference lookups.
    pub fn label(&self) -> &'static str {
        match self {
            OutageSpec::AsConfigured => "normal",
            OutageSpec::FullRun(OutageMode::Unstable) => "unstable",
            OutageSpec::FullRun(OutageMode::Down) => "down",
            OutageSpec::Schedule(_) => "schedule",
        }
    }

    /// Parses a CLI token: `none`, `unstable`, `down`, or a path to a JSON
    /// schedule (either a bare array of windows or an object with an
    /// `outage_windows` field).
    pub fn parse(token: &str) -> Result<Self, ReportError> {
        match token {
            "none" | "normal" => Ok(OutageSpec::AsConfigured),
            "unstable" => Ok(OutageSpec::FullRun(OutageMode::Unstable)),
            "down" => Ok(OutageSpec::FullRun(OutageMode::Down)),
            path => {
                let text = fs::read_to_string(path).map_err(|e| {
                    ReportError::InvalidOutage(format!(
                        "`{path}` is not a known mode (none, unstable, down) and could not be \
                         read as a schedule file: {e}"
                    ))
                })?;
                let value: serde_json::Value = serde_json::from_str(&text)?;
                let windows = match value {
                    serde_json::Value::Array(_) => serde_json::from_value(value)?,
                    serde_json::Value::Object(mut map) => match map.remove("outage_windows") {
                        Some(inner) => serde_json::from_value(inner)?,
                        None => {
                            return Err(ReportError::InvalidOutage(format!(
                                "`{path}` has no `outage_windows` field"
                            )))
                        }
                    },
                    _ => {
                        return Err(ReportError::InvalidOutage(format!(
                            "`{path}` must hold an array of outage windows"
                        )))
                    }
                };
                Ok(OutageSpec::Schedule(windows))
            }
        }
    }

    /// Installs this spec's windows into a loaded scenario.
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<(), ReportError> {
        match self {
            OutageSpec::AsConfigured => Ok(()),
            OutageSpec::FullRun(mode) => {
                // Open-ended so tasks that straggle past the configured
                // horizon still see the degraded network.
                cfg.outage_windows = vec![OutageWindow {
                    start_s: 0.0,
                    end_s: f64::INFINITY,
                    mode: *mode,
                }];
                Ok(())
            }
            OutageSpec::Schedule(windows) => {
                let mut sorted = windows.clone();
                sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
                for w in &sorted {
                    if !(w.end_s > w.start_s) || w.start_s < 0.0 {
                        return Err(ReportError::InvalidOutage(format!(
                            "window [{}, {}) is empty or negative",
                            w.start_s, w.end_s
                        )));
                    }
                }
                for pair in sorted.windows(2) {
                    if pair[1].start_s < pair[0].end_s {
                        return Err(ReportError::InvalidOutage(format!(
                            "windows [{}, {}) and [{}, {}) overlap",
                            pair[0].start_s, pair[0].end_s, pair[1].start_s, pair[1].end_s
                        )));
                    }
                }
                cfg.outage_windows = sorted;
                Ok(())
            }
        }
    }
}

/// Resolves a scenario source: a shipped preset name or a path to a JSON
/// scenario document.
pub fn load_scenario(source: &str) -> Result<ScenarioConfig, ReportError> {
    if PRESET_NAMES.contains(&source) {
        Ok(ScenarioConfig::preset(source)?)
    } else {
        Ok(ScenarioConfig::from_path(Path::new(source))?)
    }
}

/// Parses CLI architecture tokens (`cloud`, `gateway`, `dfc`, `all`; comma
/// splitting is the caller's job). Duplicates collapse; order is normalized
/// to cloud, gateway, dfc.
pub fn parse_architectures(tokens: &[String]) -> Result<Vec<Architecture>, ReportError> {
    let mut picked = BTreeSet::new();
    for token in tokens {
        match token.trim().to_ascii_lowercase().as_str() {
            "" => {}
            "all" => {
                picked.extend(Architecture::ALL);
            }
            "cloud" | "cloud_centric" => {
                picked.insert(Architecture::CloudCentric);
            }
            "gateway" | "gateway_edge" => {
                picked.insert(Architecture::GatewayEdge);
            }
            "dfc" | "device_first" | "dfc_ai" => {
                picked.insert(Architecture::DfcAi);
            }
            other => return Err(ReportError::UnknownArchitecture(other.to_string())),
        }
    }
    if picked.is_empty() {
        return Err(ReportError::NoArchitectures);
    }
    Ok(Architecture::ALL.into_iter().filter(|a| picked.contains(a)).collect())
}

/// One full sweep request.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Preset name or path to a scenario JSON document.
    pub scenario: String,
    pub architectures: Vec<Architecture>,
    /// Seeds `base_seed .. base_seed + runs` are simulated per architecture.
    pub runs: u32,
    pub base_seed: u64,
    /// Overrides the scenario's configured duration when set.
    pub duration_s: Option<f64>,
    pub outage: OutageSpec,
    /// Worker threads for the sweep; 1 runs sequentially.
    pub parallel: usize,
}

/// Headline numbers of a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub generated: u64,
    pub completed: u64,
    pub failed: u64,
    pub deferred: u64,
    pub deadline_missed: u64,
    pub mean_latency_ms: f64,
    pub energy_wh: f64,
    pub annual_cost_usd: f64,
    /// Fraction of outage-window tasks that completed within deadline;
    /// absent when no non-deferrable task arrived during an outage.
    pub capability: Option<f64>,
    /// Share of generated tasks per final station, in percent.
    pub location_pct: std::collections::BTreeMap<String, f64>,
}

/// A metric aggregated across the runs of one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric_id: String,
    pub mean: f64,
    /// Present from two runs upward; a single run has no variance estimate.
    pub dispersion: Option<SummaryStatistics>,
}

impl MetricSummary {
    fn from_samples(metric_id: &str, samples: &[f64]) -> Result<Self, ReportError> {
        if samples.len() >= 2 {
            let s = named_summary(metric_id, samples)?;
            Ok(MetricSummary { metric_id: metric_id.to_string(), mean: s.mean, dispersion: Some(s) })
        } else {
            Ok(MetricSummary {
                metric_id: metric_id.to_string(),
                mean: samples.first().copied().unwrap_or(f64::NAN),
                dispersion: None,
            })
        }
    }
}

/// Closed-form predictions for the same quantities the simulator measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryBlock {
    pub latency_breakdown: LatencyBreakdown,
    pub latency_ms: f64,
    pub energy_wh: f64,
}

/// Aggregated results of one architecture across all its runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSection {
    pub architecture: Architecture,
    pub label: String,
    pub latency_ms: MetricSummary,
    pub energy_wh: MetricSummary,
    pub annual_cost_usd: MetricSummary,
    pub capability: Option<MetricSummary>,
    /// Mean share of generated tasks per final station, in percent.
    pub location_pct: std::collections::BTreeMap<String, f64>,
    /// Component-wise mean of the per-run energy accounting.
    pub energy: EnergyBreakdown,
    /// Component-wise mean of the per-run cost accounting.
    pub cost: CostBreakdown,
    pub theory: TheoryBlock,
    /// Devices whose utilization crossed the stability threshold in any run
    /// (worst utilization seen).
    pub queue_warnings: Vec<QueueWarning>,
    pub runs: Vec<RunRecord>,
}

/// One two-sample significance test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric_id: String,
    pub a: Architecture,
    pub b: Architecture,
    pub result: TTestResult,
}

/// The calibration constants a report's numbers were produced under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub architectures: ArchitectureTable,
    pub pricing: PricingTable,
    pub links: LinkTable,
}

/// The complete, self-describing result of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: ScenarioName,
    pub scenario_source: String,
    /// `normal`, `unstable`, `down`, or `schedule`.
    pub outage: String,
    pub runs: u32,
    pub base_seed: u64,
    pub duration_s: f64,
    pub statistical_method: String,
    pub architectures: Vec<ArchitectureSection>,
    /// Device-first tested against each simulated baseline on latency,
    /// energy, and cost. Empty when skipped (see `comparisons_skipped`).
    pub comparisons: Vec<Comparison>,
    pub comparisons_skipped: Option<String>,
    pub calibration: Calibration,
}

const METHOD: &str = "welch_two_sample_t_two_sided";

/// Runs the sweep described by `spec` and aggregates it into a report.
///
/// Closed-form predictions are computed on the scenario as loaded (before
/// outage injection), so the theory column always describes the undisturbed
/// system. Runs are deterministic per `(architecture, seed)` and the result
/// does not depend on `parallel`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, ReportError> {
    if spec.architectures.is_empty() {
        return Err(ReportError::NoArchitectures);
    }
    if spec.runs == 0 {
        return Err(ReportError::NoRuns);
    }

    let mut cfg = load_scenario(&spec.scenario)?;
    if let Some(d) = spec.duration_s {
        if !(d > 0.0) {
            return Err(ReportError::InvalidOutage(format!(
                "duration override must be positive, got {d}"
            )));
        }
        cfg.duration_s = d;
    }
    let baseline_cfg = cfg.clone();
    spec.outage.apply(&mut cfg)?;

    // Normalize order and drop duplicates so aggregation is well defined.
    let archs: Vec<Architecture> =
        Architecture::ALL.into_iter().filter(|a| spec.architectures.contains(a)).collect();

    let pairs: Vec<(Architecture, u64)> = archs
        .iter()
        .flat_map(|&a| (0..spec.runs).map(move |i| (a, spec.base_seed + u64::from(i))))
        .collect();

    let mut results: Vec<(Architecture, u64, RunMetrics)> = if spec.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.parallel)
            .build()
            .map_err(|e| ReportError::Parallel(e.to_string()))?;
        pool.install(|| {
            pairs.par_iter().map(|&(a, s)| (a, s, run_simulation(&cfg, a, s))).collect()
        })
    } else {
        pairs.iter().map(|&(a, s)| (a, s, run_simulation(&cfg, a, s))).collect()
    };
    results.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));

    let mut sections = Vec::with_capacity(archs.len());
    for &arch in &archs {
        let runs: Vec<&RunMetrics> =
            results.iter().filter(|(a, _, _)| *a == arch).map(|(_, _, m)| m).collect();
        sections.push(build_section(&baseline_cfg, &cfg, arch, &runs)?);
    }

    let (comparisons, comparisons_skipped) = build_comparisons(&sections, spec.runs)?;

    Ok(ExperimentReport {
        scenario: cfg.name,
        scenario_source: spec.scenario.clone(),
        outage: spec.outage.label().to_string(),
        runs: spec.runs,
        base_seed: spec.base_seed,
        duration_s: cfg.duration_s,
        statistical_method: METHOD.to_string(),
        architectures: sections,
        comparisons,
        comparisons_skipped,
        calibration: Calibration {
            architectures: baseline_cfg.architecture_params.clone(),
            pricing: baseline_cfg.pricing.clone(),
            links: baseline_cfg.links.clone(),
        },
    })
}

fn build_section(
    baseline_cfg: &ScenarioConfig,
    cfg: &ScenarioConfig,
    arch: Architecture,
    runs: &[&RunMetrics],
) -> Result<ArchitectureSection, ReportError> {
    let mut records = Vec::with_capacity(runs.len());
    let mut latency = Vec::with_capacity(runs.len());
    let mut energy = Vec::with_capacity(runs.len());
    let mut cost = Vec::with_capacity(runs.len());
    let mut capability = Vec::new();
    let mut energy_parts = Vec::with_capacity(runs.len());
    let mut cost_parts = Vec::with_capacity(runs.len());
    let mut warnings: std::collections::BTreeMap<String, f64> = std::collections::BTreeMap::new();
    let mut location_sum: std::collections::BTreeMap<String, f64> =
        std::collections::BTreeMap::new();

    for m in runs {
        let e = account_energy(cfg, m);
        let c = account_cost(cfg, m);
        let cap = m.capability_fraction();
        let mut location_pct = std::collections::BTreeMap::new();
        if m.generated > 0 {
            for (loc, count) in &m.location_counts {
                let pct = 100.0 * *count as f64 / m.generated as f64;
                location_pct.insert(loc.key().to_string(), pct);
                *location_sum.entry(loc.key().to_string()).or_insert(0.0) += pct;
            }
        }
        for w in &m.queue_warnings {
            let entry = warnings.entry(w.device_id.clone()).or_insert(w.utilization);
            *entry = entry.max(w.utilization);
        }
        latency.push(m.mean_latency_ms());
        energy.push(e.total_wh());
        cost.push(c.total_usd());
        if let Some(v) = cap {
            capability.push(v);
        }
        records.push(RunRecord {
            seed: m.seed,
            generated: m.generated,
            completed: m.completed,
            failed: m.failed,
            deferred: m.deferred,
            deadline_missed: m.deadline_missed,
            mean_latency_ms: m.mean_latency_ms(),
            energy_wh: e.total_wh(),
            annual_cost_usd: c.total_usd(),
            capability: cap,
            location_pct,
        });
        energy_parts.push(e);
        cost_parts.push(c);
    }

    let n = runs.len() as f64;
    let location_pct =
        location_sum.into_iter().map(|(k, v)| (k, v / n)).collect::<std::collections::BTreeMap<_, _>>();

    let capability_summary = if capability.is_empty() {
        None
    } else {
        Some(MetricSummary::from_samples("capability", &capability)?)
    };

    Ok(ArchitectureSection {
        architecture: arch,
        label: arch.label().to_string(),
        latency_ms: MetricSummary::from_samples("latency_ms", &latency)?,
        energy_wh: MetricSummary::from_samples("energy_wh", &energy)?,
        annual_cost_usd: MetricSummary::from_samples("annual_cost_usd", &cost)?,
        capability: capability_summary,
        location_pct,
        energy: mean_energy(&energy_parts),
        cost: mean_cost(&cost_parts),
        theory: TheoryBlock {
            latency_breakdown: predict_breakdown(baseline_cfg, arch),
            latency_ms: predict_mean_latency_ms(baseline_cfg, arch),
            energy_wh: predict_energy_wh(baseline_cfg, arch, baseline_cfg.duration_s),
        },
        queue_warnings: warnings
            .into_iter()
            .map(|(device_id, utilization)| QueueWarning { device_id, utilization })
            .collect(),
        runs: records,
    })
}

fn mean_energy(parts: &[EnergyBreakdown]) -> EnergyBreakdown {
    let n = parts.len().max(1) as f64;
    let mut out = EnergyBreakdown {
        e_processing_wh: 0.0,
        e_transmission_wh: 0.0,
        per_tier_wh: std::collections::BTreeMap::new(),
        per_device_class_wh: std::collections::BTreeMap::new(),
    };
    for p in parts {
        out.e_processing_wh += p.e_processing_wh / n;
        out.e_transmission_wh += p.e_transmission_wh / n;
        for (tier, v) in &p.per_tier_wh {
            *out.per_tier_wh.entry(*tier).or_insert(0.0) += v / n;
        }
        for (class, v) in &p.per_device_class_wh {
            *out.per_device_class_wh.entry(*class).or_insert(0.0) += v / n;
        }
    }
    out
}

fn mean_cost(parts: &[CostBreakdown]) -> CostBreakdown {
    let n = parts.len().max(1) as f64;
    let mut out = CostBreakdown::default();
    for p in parts {
        out.c_compute_usd += p.c_compute_usd / n;
        out.c_transfer_usd += p.c_transfer_usd / n;
        out.c_infrastructure_usd += p.c_infrastructure_usd / n;
        out.c_operations_usd += p.c_operations_usd / n;
    }
    out
}

fn build_comparisons(
    sections: &[ArchitectureSection],
    runs: u32,
) -> Result<(Vec<Comparison>, Option<String>), ReportError> {
    let dfc = sections.iter().find(|s| s.architecture == Architecture::DfcAi);
    let baselines: Vec<&ArchitectureSection> =
        sections.iter().filter(|s| s.architecture != Architecture::DfcAi).collect();

    if runs < 2 {
        return Ok((
            Vec::new(),
            Some("single run per architecture: no variance estimate, tests skipped".to_string()),
        ));
    }
    let Some(dfc) = dfc else {
        return Ok((
            Vec::new(),
            Some("device-first architecture not simulated: nothing to test against".to_string()),
        ));
    };
    if baselines.is_empty() {
        return Ok((
            Vec::new(),
            Some("no baseline architecture simulated: nothing to test against".to_string()),
        ));
    }

    let samples = |s: &ArchitectureSection, metric: &str| -> Vec<f64> {
        s.runs
            .iter()
            .map(|r| match metric {
                "latency_ms" => r.mean_latency_ms,
                "energy_wh" => r.energy_wh,
                _ => r.annual_cost_usd,
            })
            .collect()
    };

    let mut comparisons = Vec::new();
    for baseline in baselines {
        for metric in ["latency_ms", "energy_wh", "annual_cost_usd"] {
            let a = samples(dfc, metric);
            let b = samples(baseline, metric);
            comparisons.push(Comparison {
                metric_id: metric.to_string(),
                a: Architecture::DfcAi,
                b: baseline.architecture,
                result: welch_t_test(&a, &b)?,
            });
        }
    }
    Ok((comparisons, None))
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

/// Output flavors of [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn parse(token: &str) -> Result<Self, ReportError> {
        match token.trim().to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(ReportError::InvalidOutage(format!(
                "unknown report format `{other}` (expected md, csv, json)"
            ))),
        }
    }

    fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

/// Writes `report_<scenario>_<outage>.<ext>` into `dir` for each requested
/// format and returns the written paths. Identical reports produce
/// byte-identical files.
pub fn emit_report(
    report: &ExperimentReport,
    formats: &[ReportFormat],
    dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir)?;
    let stem = format!("report_{}_{}", report.scenario, report.outage);
    let mut chosen: Vec<ReportFormat> = formats.to_vec();
    chosen.sort();
    chosen.dedup();
    let mut written = Vec::new();
    for format in chosen {
        let body = match format {
            ReportFormat::Markdown => render_markdown(report),
            ReportFormat::Csv => render_csv(report),
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(report)?;
                s.push('\n');
                s
            }
        };
        let path = dir.join(format!("{stem}.{}", format.extension()));
        let mut file = fs::File::create(&path)?;
        file.write_all(body.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// All final stations, in table-column order.
const LOCATION_COLUMNS: [&str; 7] =
    ["origin_device", "cluster_gpu", "gateway", "edge_server", "cloud", "failed", "deferred"];

fn render_markdown(report: &ExperimentReport) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# {} — architecture comparison\n", heading(report.scenario));
    let _ = writeln!(
        md,
        "Source: `{}` · Outage: {} · Runs per architecture: {} · Base seed: {} · \
         Duration: {} s",
        report.scenario_source, report.outage, report.runs, report.base_seed, report.duration_s
    );
    let _ = writeln!(md, "Statistics: {}\n", report.statistical_method);

    let dash = "–".to_string();
    let disp = |s: &MetricSummary, f: &dyn Fn(f64) -> String| -> (String, String) {
        match &s.dispersion {
            Some(d) => (f(d.ci95_half_width), f(d.sample_std)),
            None => (dash.clone(), dash.clone()),
        }
    };
    let ms = |v: f64| format!("{v:.3}");
    let wh = |v: f64| format!("{v:.3}");
    let usd = |v: f64| format!("{v:.2}");
    let frac = |v: f64| format!("{v:.4}");

    let _ = writeln!(md, "## Mean end-to-end latency (ms)\n");
    let _ = writeln!(md, "| Architecture | Simulated | 95% CI ± | Sample std | Closed form |");
    let _ = writeln!(md, "|---|---|---|---|---|");
    for s in &report.architectures {
        let (ci, std) = disp(&s.latency_ms, &ms);
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            s.label,
            ms(s.latency_ms.mean),
            ci,
            std,
            ms(s.theory.latency_ms)
        );
    }

    let _ = writeln!(md, "\n## Energy over the run (Wh)\n");
    let _ = writeln!(md, "| Architecture | Simulated | 95% CI ± | Sample std | Closed form |");
    let _ = writeln!(md, "|---|---|---|---|---|");
    for s in &report.architectures {
        let (ci, std) = disp(&s.energy_wh, &wh);
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            s.label,
            wh(s.energy_wh.mean),
            ci,
            std,
            wh(s.theory.energy_wh)
        );
    }

    let _ = writeln!(md, "\n## Energy split (Wh)\n");
    let _ = writeln!(md, "| Architecture | Processing | Transmission |");
    let _ = writeln!(md, "|---|---|---|");
    for s in &report.architectures {
        let _ = writeln!(
            md,
            "| {} | {} | {} |",
            s.label,
            wh(s.energy.e_processing_wh),
            wh(s.energy.e_transmission_wh)
        );
    }

    let _ = writeln!(md, "\n## Annualized cost (USD/year)\n");
    let _ = writeln!(md, "| Architecture | Simulated | 95% CI ± | Sample std |");
    let _ = writeln!(md, "|---|---|---|---|");
    for s in &report.architectures {
        let (ci, std) = disp(&s.annual_cost_usd, &usd);
        let _ = writeln!(md, "| {} | {} | {} | {} |", s.label, usd(s.annual_cost_usd.mean), ci, std);
    }

    let _ = writeln!(md, "\n## Cost split (USD/year)\n");
    let _ = writeln!(md, "| Architecture | Compute | Transfer | Infrastructure | Operations |");
    let _ = writeln!(md, "|---|---|---|---|---|");
    for s in &report.architectures {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} |",
            s.label,
            usd(s.cost.c_compute_usd),
            usd(s.cost.c_transfer_usd),
            usd(s.cost.c_infrastructure_usd),
            usd(s.cost.c_operations_usd)
        );
    }

    let used: Vec<&str> = LOCATION_COLUMNS
        .iter()
        .copied()
        .filter(|k| report.architectures.iter().any(|s| s.location_pct.contains_key(*k)))
        .collect();
    if !used.is_empty() {
        let _ = writeln!(md, "\n## Processing location (% of generated tasks)\n");
        let _ = writeln!(md, "| Architecture | {} |", used.join(" | "));
        let _ = writeln!(md, "|{}|", "---|".repeat(used.len() + 1));
        for s in &report.architectures {
            let cells: Vec<String> = used
                .iter()
                .map(|k| s.location_pct.get(*k).map_or(dash.clone(), |v| format!("{v:.2}")))
                .collect();
            let _ = writeln!(md, "| {} | {} |", s.label, cells.join(" | "));
        }
    }

    if report.architectures.iter().any(|s| s.capability.is_some()) {
        let _ = writeln!(md, "\n## Operational capability during outage\n");
        let _ = writeln!(md, "Fraction of non-deferrable tasks arriving inside an outage window");
        let _ = writeln!(md, "that still completed within their deadline.\n");
        let _ = writeln!(md, "| Architecture | Capability | 95% CI ± |");
        let _ = writeln!(md, "|---|---|---|");
        for s in &report.architectures {
            match &s.capability {
                Some(c) => {
                    let (ci, _) = disp(c, &frac);
                    let _ = writeln!(md, "| {} | {} | {} |", s.label, frac(c.mean), ci);
                }
                None => {
                    let _ = writeln!(md, "| {} | {} | {} |", s.label, dash, dash);
                }
            }
        }
    }

    let _ = writeln!(md, "\n## Significance\n");
    match &report.comparisons_skipped {
        Some(reason) => {
            let _ = writeln!(md, "_Tests skipped: {reason}._");
        }
        None => {
            let _ = writeln!(md, "| Metric | Pair | t | df | p | p < 0.05 |");
            let _ = writeln!(md, "|---|---|---|---|---|---|");
            for c in &report.comparisons {
                let label = |a: Architecture| {
                    report
                        .architectures
                        .iter()
                        .find(|s| s.architecture == a)
                        .map_or_else(|| a.key().to_string(), |s| s.label.clone())
                };
                let _ = writeln!(
                    md,
                    "| {} | {} vs {} | {:.3} | {:.2} | {:.4e} | {} |",
                    c.metric_id,
                    label(c.a),
                    label(c.b),
                    c.result.t_statistic,
                    c.result.degrees_of_freedom,
                    c.result.p_value,
                    if c.result.significant { "yes" } else { "no" }
                );
            }
        }
    }

    let warned: Vec<(&str, &QueueWarning)> = report
        .architectures
        .iter()
        .flat_map(|s| s.queue_warnings.iter().map(move |w| (s.label.as_str(), w)))
        .collect();
    if !warned.is_empty() {
        let _ = writeln!(md, "\n## Queue pressure\n");
        for (label, w) in warned {
            let _ = writeln!(
                md,
                "- `{}` reached {:.1}% utilization under {}",
                w.device_id,
                100.0 * w.utilization,
                label
            );
        }
    }

    md
}

fn heading(name: ScenarioName) -> &'static str {
    match name {
        ScenarioName::DroneFleet => "Drone fleet",
        ScenarioName::SensorNetwork => "Sensor network",
        ScenarioName::WorkerSafety => "Worker safety",
    }
}

/// CSV uses shortest-round-trip float formatting, so a value read back from
/// the CSV equals the JSON field bit for bit.
fn render_csv(report: &ExperimentReport) -> String {
    let mut csv = String::new();
    let _ = writeln!(csv, "scenario,outage,architecture,metric,mean,sample_std,ci95_half_width,n");
    let scenario = report.scenario.to_string();
    let mut row = |arch: &str, metric: &str, mean: f64, d: &Option<SummaryStatistics>| {
        let (std, ci, n) = match d {
            Some(d) => (format!("{}", d.sample_std), format!("{}", d.ci95_half_width), d.n.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        let _ = writeln!(
            csv,
            "{scenario},{},{arch},{metric},{mean},{std},{ci},{n}",
            report.outage
        );
    };
    for s in &report.architectures {
        let arch = s.architecture.key();
        row(arch, "latency_ms", s.latency_ms.mean, &s.latency_ms.dispersion);
        row(arch, "energy_wh", s.energy_wh.mean, &s.energy_wh.dispersion);
        row(arch, "annual_cost_usd", s.annual_cost_usd.mean, &s.annual_cost_usd.dispersion);
        if let Some(c) = &s.capability {
            row(arch, "capability", c.mean, &c.dispersion);
        }
        for (k, v) in &s.location_pct {
            row(arch, &format!("location_pct:{k}"), *v, &None);
        }
        row(arch, "theory:latency_ms", s.theory.latency_ms, &None);
        row(arch, "theory:energy_wh", s.theory.energy_wh, &None);
    }
    csv
}

// ---------------------------------------------------------------------------
// Reference comparison
// ---------------------------------------------------------------------------

/// How one reference cell is judged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckKind {
    /// `|simulated - expected| / |expected| <= tolerance` (expected 0 means
    /// the simulated value must be 0 too).
    Relative { expected: f64, tolerance: f64 },
    /// `|simulated - expected_pct| <= tolerance_pp`, both in percent.
    PercentagePoints { expected_pct: f64, tolerance_pp: f64 },
    /// `lo <= simulated <= hi`.
    Band { lo: f64, hi: f64 },
}

/// One reference cell checked against one simulated value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCheck {
    /// `<outage>/<scenario>/<architecture>/<metric>[/<detail>]`.
    pub metric_id: String,
    pub simulated: f64,
    pub check: CheckKind,
    /// Relative error, percentage-point distance, or distance outside the
    /// band (0 when inside).
    pub error: f64,
    pub pass: bool,
}

/// The outcome of [`compare_to_reference`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceComparison {
    pub checks: Vec<ReferenceCheck>,
    pub all_pass: bool,
}

#[derive(Debug, Deserialize)]
struct ReferenceFile {
    tolerances: ReferenceTolerances,
    #[serde(default)]
    normal: std::collections::BTreeMap<String, ScenarioReference>,
    #[serde(default)]
    down: OutageReference,
    #[serde(default)]
    unstable: OutageReference,
}

#[derive(Debug, Deserialize)]
struct ReferenceTolerances {
    latency_rel: f64,
    energy_rel: f64,
    cost_rel: f64,
    location_pp: f64,
}

#[derive(Debug, Default, Deserialize)]
struct ScenarioReference {
    #[serde(default)]
    latency_ms: std::collections::BTreeMap<String, f64>,
    #[serde(default)]
    energy_wh: std::collections::BTreeMap<String, f64>,
    #[serde(default)]
    annual_cost_usd: std::collections::BTreeMap<String, f64>,
    /// architecture key → final station key → percent of generated tasks.
    #[serde(default)]
    location_pct: std::collections::BTreeMap<String, std::collections::BTreeMap<String, f64>>,
}

#[derive(Debug, Default, Deserialize)]
struct OutageReference {
    /// architecture key → inclusive `[lo, hi]` capability band.
    #[serde(default)]
    capability: std::collections::BTreeMap<String, (f64, f64)>,
}

fn judge(simulated: f64, check: &CheckKind) -> (f64, bool) {
    match check {
        CheckKind::Relative { expected, tolerance } => {
            if *expected == 0.0 {
                let error = simulated.abs();
                (error, error == 0.0)
            } else {
                let error = (simulated - expected).abs() / expected.abs();
                (error, error <= *tolerance)
            }
        }
        CheckKind::PercentagePoints { expected_pct, tolerance_pp } => {
            let error = (simulated - expected_pct).abs();
            (error, error <= *tolerance_pp)
        }
        CheckKind::Band { lo, hi } => {
            let error = if simulated < *lo {
                lo - simulated
            } else if simulated > *hi {
                simulated - hi
            } else {
                0.0
            };
            (error, error == 0.0)
        }
    }
}

/// Checks every `report_*.json` in `report_dir` against the reference table.
///
/// Each reference cell that applies to a (scenario, outage) combination
/// present in the directory must be covered by a simulated value; a cell
/// left uncovered (for example, an architecture missing from the sweep) is
/// an error rather than a silent pass.
pub fn compare_to_reference(
    report_dir: &Path,
    reference_path: &Path,
) -> Result<ReferenceComparison, ReportError> {
    let reference: ReferenceFile = serde_json::from_str(&fs::read_to_string(reference_path)?)?;

    let mut report_paths: Vec<PathBuf> = fs::read_dir(report_dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("report_"))
        })
        .collect();
    report_paths.sort();
    if report_paths.is_empty() {
        return Err(ReportError::EmptyReportDir(report_dir.display().to_string()));
    }

    let mut reports = Vec::new();
    for path in &report_paths {
        let report: ExperimentReport = serde_json::from_str(&fs::read_to_string(path)?)?;
        reports.push(report);
    }

    let mut checks = Vec::new();
    let mut covered: BTreeSet<String> = BTreeSet::new();
    let mut expected: BTreeSet<String> = BTreeSet::new();

    for report in &reports {
        let scenario = report.scenario.to_string();
        match report.outage.as_str() {
            "normal" => {
                let Some(refs) = reference.normal.get(&scenario) else { continue };
                for s in &report.architectures {
                    let arch = s.architecture.key();
                    let cell = |metric: &str, detail: Option<&str>| match detail {
                        Some(d) => format!("normal/{scenario}/{arch}/{metric}/{d}"),
                        None => format!("normal/{scenario}/{arch}/{metric}"),
                    };
                    if let Some(&want) = refs.latency_ms.get(arch) {
                        let id = cell("latency_ms", None);
                        let check = CheckKind::Relative {
                            expected: want,
                            tolerance: reference.tolerances.latency_rel,
                        };
                        let (error, pass) = judge(s.latency_ms.mean, &check);
                        covered.insert(id.clone());
                        checks.push(ReferenceCheck {
                            metric_id: id,
                            simulated: s.latency_ms.mean,
                            check,
                            error,
                            pass,
                        });
                    }
                    if let Some(&want) = refs.energy_wh.get(arch) {
                        let id = cell("energy_wh", None);
                        let check = CheckKind::Relative {
                            expected: want,
                            tolerance: reference.tolerances.energy_rel,
                        };
                        let (error, pass) = judge(s.energy_wh.mean, &check);
                        covered.insert(id.clone());
                        checks.push(ReferenceCheck {
                            metric_id: id,
                            simulated: s.energy_wh.mean,
                            check,
                            error,
                            pass,
                        });
                    }
                    if let Some(&want) = refs.annual_cost_usd.get(arch) {
                        let id = cell("annual_cost_usd", None);
                        let check = CheckKind::Relative {
                            expected: want,
                            tolerance: reference.tolerances.cost_rel,
                        };
                        let (error, pass) = judge(s.annual_cost_usd.mean, &check);
                        covered.insert(id.clone());
                        checks.push(ReferenceCheck {
                            metric_id: id,
                            simulated: s.annual_cost_usd.mean,
                            check,
                            error,
                            pass,
                        });
                    }
                    if let Some(locs) = refs.location_pct.get(arch) {
                        for (loc, &want_pct) in locs {
                            let id = cell("location_pct", Some(loc));
                            let simulated = s.location_pct.get(loc).copied().unwrap_or(0.0);
                            let check = CheckKind::PercentagePoints {
                                expected_pct: want_pct,
                                tolerance_pp: reference.tolerances.location_pp,
                            };
                            let (error, pass) = judge(simulated, &check);
                            covered.insert(id.clone());
                            checks.push(ReferenceCheck { metric_id: id, simulated, check, error, pass });
                        }
                    }
                }
                for (arch, _) in &refs.latency_ms {
                    expected.insert(format!("normal/{scenario}/{arch}/latency_ms"));
                }
                for (arch, _) in &refs.energy_wh {
                    expected.insert(format!("normal/{scenario}/{arch}/energy_wh"));
                }
                for (arch, _) in &refs.annual_cost_usd {
                    expected.insert(format!("normal/{scenario}/{arch}/annual_cost_usd"));
                }
                for (arch, locs) in &refs.location_pct {
                    for (loc, _) in locs {
                        expected.insert(format!("normal/{scenario}/{arch}/location_pct/{loc}"));
                    }
                }
            }
            outage @ ("down" | "unstable") => {
                let refs =
                    if outage == "down" { &reference.down } else { &reference.unstable };
                for s in &report.architectures {
                    let arch = s.architecture.key();
                    if let Some(&(lo, hi)) = refs.capability.get(arch) {
                        let id = format!("{outage}/{scenario}/{arch}/capability");
                        let Some(cap) = &s.capability else {
                            return Err(ReportError::MissingReferenceMetric(id));
                        };
                        let check = CheckKind::Band { lo, hi };
                        let (error, pass) = judge(cap.mean, &check);
                        covered.insert(id.clone());
                        checks.push(ReferenceCheck {
                            metric_id: id,
                            simulated: cap.mean,
                            check,
                            error,
                            pass,
                        });
                    }
                }
                for (arch, _) in &refs.capability {
                    expected.insert(format!("{outage}/{scenario}/{arch}/capability"));
                }
            }
            _ => {}
        }
    }

    for id in expected.difference(&covered) {
        return Err(ReportError::MissingReferenceMetric(id.clone()));
    }
    if checks.is_empty() {
        return Err(ReportError::MissingReferenceMetric(
            "no reference cell applies to any report in the directory".to_string(),
        ));
    }

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(ReferenceComparison { checks, all_pass })
}

/// Plain-text table of a reference comparison, one line per check.
pub fn render_comparison(cmp: &ReferenceComparison) -> String {
    let mut out = String::new();
    let width = cmp.checks.iter().map(|c| c.metric_id.len()).max().unwrap_or(5).max(5);
    let _ = writeln!(out, "{:<width$}  {:>12}  {:>24}  {:>10}  result", "check", "simulated", "expected", "error");
    for c in &cmp.checks {
        let expected = match &c.check {
            CheckKind::Relative { expected, tolerance } => {
                format!("{expected} ±{:.0}%", 100.0 * tolerance)
            }
            CheckKind::PercentagePoints { expected_pct, tolerance_pp } => {
                format!("{expected_pct} ±{tolerance_pp} pp")
            }
            CheckKind::Band { lo, hi } => format!("[{lo}, {hi}]"),
        };
        let _ = writeln!(
            out,
            "{:<width$}  {:>12.4}  {:>24}  {:>10.4}  {}",
            c.metric_id,
            c.simulated,
            expected,
            c.error,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    let _ = writeln!(
        out,
        "{}",
        if cmp.all_pass {
            "all checks passed".to_string()
        } else {
            format!("{} of {} checks failed", cmp.checks.iter().filter(|c| !c.pass).count(), cmp.checks.len())
        }
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_spec(outage: OutageSpec, runs: u32, parallel: usize) -> ExperimentSpec {
        ExperimentSpec {
            scenario: "drone_fleet".to_string(),
            architectures: Architecture::ALL.to_vec(),
            runs,
            base_seed: 42,
            duration_s: Some(900.0),
            outage,
            parallel,
        }
    }

    #[test]
    fn single_run_sweeps_skip_significance_tests() {
        let report = run_experiment(&quick_spec(OutageSpec::AsConfigured, 1, 1)).unwrap();
        assert!(report.comparisons.is_empty());
        assert!(report.comparisons_skipped.is_some());
        for s in &report.architectures {
            assert!(s.latency_ms.dispersion.is_none());
            assert_eq!(s.runs.len(), 1);
        }
        assert_eq!(report.architectures.len(), 3);
        assert_eq!(report.duration_s, 900.0);
    }

    #[test]
    fn multi_run_sweeps_test_dfc_against_both_baselines() {
        let report = run_experiment(&quick_spec(OutageSpec::AsConfigured, 3, 1)).unwrap();
        assert!(report.comparisons_skipped.is_none());
        assert_eq!(report.comparisons.len(), 6);
        for c in &report.comparisons {
            assert_eq!(c.a, Architecture::DfcAi);
            assert_ne!(c.b, Architecture::DfcAi);
        }
        for s in &report.architectures {
            let d = s.latency_ms.dispersion.as_ref().unwrap();
            assert_eq!(d.n, 3);
            assert!(d.ci95_half_width >= 0.0);
        }
    }

    #[test]
    fn parallel_and_sequential_sweeps_agree_exactly() {
        let sequential = run_experiment(&quick_spec(OutageSpec::AsConfigured, 2, 1)).unwrap();
        let parallel = run_experiment(&quick_spec(OutageSpec::AsConfigured, 2, 4)).unwrap();
        assert_eq!(sequential, parallel);
    }

    #[test]
    fn identical_invocations_write_identical_bytes() {
        let report = run_experiment(&quick_spec(OutageSpec::AsConfigured, 2, 1)).unwrap();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let formats = [ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json];
        let a = emit_report(&report, &formats, dir_a.path()).unwrap();
        let b = emit_report(&report, &formats, dir_b.path()).unwrap();
        assert_eq!(a.len(), 3);
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
        }
        let text = fs::read_to_string(&a[2]).unwrap();
        let round: ExperimentReport = serde_json::from_str(&text).unwrap();
        assert_eq!(round, report);
    }

    #[test]
    fn csv_values_equal_json_fields_exactly() {
        let report = run_experiment(&quick_spec(OutageSpec::AsConfigured, 2, 1)).unwrap();
        let csv = render_csv(&report);
        let mut seen = 0;
        for line in csv.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            let (arch, metric, mean) = (cols[2], cols[3], cols[4].parse::<f64>().unwrap());
            let section = report
                .architectures
                .iter()
                .find(|s| s.architecture.key() == arch)
                .unwrap();
            let expected = match metric {
                "latency_ms" => section.latency_ms.mean,
                "energy_wh" => section.energy_wh.mean,
                "annual_cost_usd" => section.annual_cost_usd.mean,
                "theory:latency_ms" => section.theory.latency_ms,
                "theory:energy_wh" => section.theory.energy_wh,
                m if m.starts_with("location_pct:") => {
                    section.location_pct[m.trim_start_matches("location_pct:")]
                }
                _ => continue,
            };
            assert_eq!(mean.to_bits(), expected.to_bits(), "{metric} differs for {arch}");
            seen += 1;
        }
        assert!(seen >= 15);
    }

    #[test]
    fn rejected_sweeps_report_why() {
        let mut spec = quick_spec(OutageSpec::AsConfigured, 1, 1);
        spec.architectures.clear();
        assert!(matches!(run_experiment(&spec), Err(ReportError::NoArchitectures)));

        let mut spec = quick_spec(OutageSpec::AsConfigured, 0, 1);
        spec.runs = 0;
        assert!(matches!(run_experiment(&spec), Err(ReportError::NoRuns)));

        assert!(matches!(
            parse_architectures(&["hybrid".to_string()]),
            Err(ReportError::UnknownArchitecture(_))
        ));
        let all = parse_architectures(&["all".to_string()]).unwrap();
        assert_eq!(all, Architecture::ALL.to_vec());
        let pair = parse_architectures(&["dfc".to_string(), "cloud".to_string()]).unwrap();
        assert_eq!(pair, vec![Architecture::CloudCentric, Architecture::DfcAi]);
    }

    #[test]
    fn outage_tokens_parse_and_schedules_validate() {
        assert_eq!(OutageSpec::parse("none").unwrap().label(), "normal");
        assert_eq!(OutageSpec::parse("down").unwrap().label(), "down");
        assert_eq!(OutageSpec::parse("unstable").unwrap().label(), "unstable");
        assert!(matches!(
            OutageSpec::parse("sometimes"),
            Err(ReportError::InvalidOutage(_))
        ));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("windows.json");
        fs::write(
            &path,
            r#"[{"start_s": 10.0, "end_s": 20.0, "mode": "down"},
               {"start_s": 30.0, "end_s": 40.0, "mode": "unstable"}]"#,
        )
        .unwrap();
        let spec = OutageSpec::parse(path.to_str().unwrap()).unwrap();
        assert_eq!(spec.label(), "schedule");
        let mut cfg = ScenarioConfig::preset("drone_fleet").unwrap();
        spec.apply(&mut cfg).unwrap();
        assert_eq!(cfg.outage_windows.len(), 2);

        let overlapping = OutageSpec::Schedule(vec![
            OutageWindow { start_s: 0.0, end_s: 20.0, mode: OutageMode::Down },
            OutageWindow { start_s: 10.0, end_s: 30.0, mode: OutageMode::Down },
        ]);
        assert!(matches!(overlapping.apply(&mut cfg), Err(ReportError::InvalidOutage(_))));
    }

    #[test]
    fn full_run_outage_reaches_the_engine() {
        let report = run_experiment(&quick_spec(
            OutageSpec::FullRun(OutageMode::Down),
            1,
            1,
        ))
        .unwrap();
        let cloud = &report.architectures[0];
        assert_eq!(cloud.architecture, Architecture::CloudCentric);
        let capability = cloud.capability.as_ref().expect("outage produces capability");
        assert_eq!(capability.mean, 0.0);
        assert_eq!(cloud.runs[0].completed, 0);
        let dfc = &report.architectures[2];
        assert!(dfc.capability.as_ref().unwrap().mean > 0.9);
    }

    fn reference_json(latency_cloud: f64) -> String {
        format!(
            r#"{{
  "tolerances": {{ "latency_rel": 0.15, "energy_rel": 0.15, "cost_rel": 0.20, "location_pp": 3.0 }},
  "normal": {{
    "drone_fleet": {{
      "latency_ms": {{ "cloud": {latency_cloud} }},
      "location_pct": {{ "dfc": {{ "origin_device": 80.4 }} }}
    }}
  }},
  "down": {{ "capability": {{ "cloud": [0.0, 0.0], "dfc": [0.9, 1.0] }} }}
}}"#
        )
    }

    #[test]
    fn reference_comparison_passes_and_fails_on_the_right_cells() {
        let normal = run_experiment(&quick_spec(OutageSpec::AsConfigured, 1, 1)).unwrap();
        let down =
            run_experiment(&quick_spec(OutageSpec::FullRun(OutageMode::Down), 1, 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&normal, &[ReportFormat::Json], dir.path()).unwrap();
        emit_report(&down, &[ReportFormat::Json], dir.path()).unwrap();

        let simulated_latency = normal.architectures[0].latency_ms.mean;
        let good = dir.path().join("good.json");
        fs::write(&good, reference_json(simulated_latency)).unwrap();
        let cmp = compare_to_reference(dir.path(), &good).unwrap();
        assert!(cmp.all_pass, "{}", render_comparison(&cmp));
        assert_eq!(cmp.checks.len(), 4);

        // A reference far outside tolerance must flip exactly that cell.
        let bad = dir.path().join("bad.json");
        fs::write(&bad, reference_json(simulated_latency * 2.0)).unwrap();
        let cmp = compare_to_reference(dir.path(), &bad).unwrap();
        assert!(!cmp.all_pass);
        let failing: Vec<&ReferenceCheck> = cmp.checks.iter().filter(|c| !c.pass).collect();
        assert_eq!(failing.len(), 1);
        assert_eq!(failing[0].metric_id, "normal/drone_fleet/cloud/latency_ms");
        assert!(render_comparison(&cmp).contains("FAIL"));
    }

    #[test]
    fn uncovered_reference_cells_are_an_error_not_a_pass() {
        // Sweep only the cloud architecture; the reference also expects dfc.
        let mut spec = quick_spec(OutageSpec::AsConfigured, 1, 1);
        spec.architectures = vec![Architecture::CloudCentric];
        let report = run_experiment(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&report, &[ReportFormat::Json], dir.path()).unwrap();
        let refs = dir.path().join("refs.json");
        fs::write(&refs, reference_json(400.0)).unwrap();
        match compare_to_reference(dir.path(), &refs) {
            Err(ReportError::MissingReferenceMetric(id)) => {
                assert!(id.contains("dfc"), "unexpected id {id}");
            }
            other => panic!("expected MissingReferenceMetric, got {other:?}"),
        }
    }

    #[test]
    fn empty_report_directories_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let refs = dir.path().join("refs.json");
        fs::write(&refs, reference_json(400.0)).unwrap();
        assert!(matches!(
            compare_to_reference(dir.path(), &refs),
            Err(ReportError::EmptyReportDir(_))
        ));
    }
}
