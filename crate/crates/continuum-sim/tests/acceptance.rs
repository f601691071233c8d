//! Acceptance gate.
//!
//! Runs the full sweep — every scenario, every architecture, ten seeds,
//! plus full-run backhaul outages — and prints exactly one PASS/FAIL line
//! per criterion. The expected values and tolerances are pinned here, next
//! to the checks that use them. The process exits non-zero if any
//! criterion fails, so this target is the single gate for the shipped
//! numbers.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use continuum_sim::engine::run_simulation;
use continuum_sim::metrics::{account_cost, account_energy};
use continuum_sim::model::{
    Architecture, OutageMode, ScenarioConfig, TaskClass, PRESET_NAMES,
};
use continuum_sim::network::transmission_energy_wh;
use continuum_sim::report::{
    emit_report, run_experiment, ArchitectureSection, ExperimentReport, ExperimentSpec,
    OutageSpec, ReportFormat,
};
use continuum_sim::stats::{summarize, welch_t_test};

const RUNS: u32 = 10;
const BASE_SEED: u64 = 42;
const SWEEP_BUDGET: Duration = Duration::from_secs(600);

const LATENCY_TOL: f64 = 0.15;
const ENERGY_TOL: f64 = 0.15;
const COST_TOL: f64 = 0.20;
const LOCATION_TOL_PP: f64 = 3.0;

/// Expected mean latency (ms) per scenario, ordered cloud/gateway/dfc.
const EXPECTED_LATENCY_MS: [(&str, [f64; 3]); 3] = [
    ("drone_fleet", [485.0, 450.0, 37.0]),
    ("sensor_network", [45.0, 11.0, 3.0]),
    ("worker_safety", [87.0, 23.0, 8.0]),
];

/// Expected daily energy (Wh) per scenario, ordered cloud/gateway/dfc.
const EXPECTED_ENERGY_WH: [(&str, [f64; 3]); 3] = [
    ("drone_fleet", [355.7, 125.3, 67.7]),
    ("sensor_network", [102.2, 89.3, 51.8]),
    ("worker_safety", [54.7, 40.3, 1.5]),
];

/// Expected annual cost (USD); only the cells with published values.
const EXPECTED_COST_USD: [(&str, Architecture, f64); 4] = [
    ("drone_fleet", Architecture::CloudCentric, 14_442.0),
    ("drone_fleet", Architecture::GatewayEdge, 1_261.0),
    ("drone_fleet", Architecture::DfcAi, 893.0),
    ("worker_safety", Architecture::DfcAi, 2.0),
];

/// Expected drone-fleet processing distribution, percent of tasks.
const EXPECTED_DFC_LOCATION_PCT: [(&str, f64); 3] =
    [("origin_device", 80.4), ("cluster_gpu", 14.3), ("cloud", 5.3)];
const EXPECTED_GATEWAY_LOCATION_PCT: [(&str, f64); 2] = [("gateway", 93.2), ("cloud", 6.8)];

struct Sweep {
    normal: BTreeMap<&'static str, ExperimentReport>,
    down: BTreeMap<&'static str, ExperimentReport>,
    unstable: BTreeMap<&'static str, ExperimentReport>,
    normal_elapsed: Duration,
}

fn spec(scenario: &str, outage: OutageSpec) -> ExperimentSpec {
    ExperimentSpec {
        scenario: scenario.to_string(),
        architectures: Architecture::ALL.to_vec(),
        runs: RUNS,
        base_seed: BASE_SEED,
        duration_s: None,
        outage,
        parallel: 1,
    }
}

fn sweep() -> Sweep {
    let mut normal = BTreeMap::new();
    let mut down = BTreeMap::new();
    let mut unstable = BTreeMap::new();

    let t0 = Instant::now();
    for name in PRESET_NAMES {
        let t = Instant::now();
        normal.insert(name, run_experiment(&spec(name, OutageSpec::AsConfigured)).unwrap());
        eprintln!("sweep: {name} normal in {:.1}s", t.elapsed().as_secs_f64());
    }
    let normal_elapsed = t0.elapsed();

    for name in PRESET_NAMES {
        let t = Instant::now();
        down.insert(
            name,
            run_experiment(&spec(name, OutageSpec::FullRun(OutageMode::Down))).unwrap(),
        );
        unstable.insert(
            name,
            run_experiment(&spec(name, OutageSpec::FullRun(OutageMode::Unstable))).unwrap(),
        );
        eprintln!("sweep: {name} down+unstable in {:.1}s", t.elapsed().as_secs_f64());
    }

    Sweep { normal, down, unstable, normal_elapsed }
}

fn section<'r>(report: &'r ExperimentReport, arch: Architecture) -> &'r ArchitectureSection {
    report.architectures.iter().find(|s| s.architecture == arch).unwrap()
}

fn rel_err(simulated: f64, expected: f64) -> f64 {
    (simulated - expected).abs() / expected.abs()
}

fn criterion(
    n: u32,
    label: &str,
    failures: &mut u32,
    f: impl FnOnce() -> Result<String, String>,
) {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(detail)) => println!("ACCEPTANCE C{n} ({label}): PASS — {detail}"),
        Ok(Err(reason)) => {
            println!("ACCEPTANCE C{n} ({label}): FAIL — {reason}");
            *failures += 1;
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| panic.downcast_ref::<&str>().copied())
                .unwrap_or("panicked");
            println!("ACCEPTANCE C{n} ({label}): FAIL — {msg}");
            *failures += 1;
        }
    }
}

/// Checks a table of expected per-architecture values against simulated
/// means, returning the worst relative error or the first failing cell.
fn check_table(
    sweep: &Sweep,
    expected: &[(&str, [f64; 3])],
    tolerance: f64,
    value: impl Fn(&ArchitectureSection) -> f64,
) -> Result<String, String> {
    let mut worst = (0.0f64, String::new());
    for (scenario, row) in expected {
        let report = &sweep.normal[scenario];
        for (arch, want) in Architecture::ALL.into_iter().zip(row) {
            let got = value(section(report, arch));
            let err = rel_err(got, *want);
            if err > worst.0 {
                worst = (err, format!("{scenario}/{}", arch.key()));
            }
            if err > tolerance {
                return Err(format!(
                    "{scenario}/{}: simulated {got:.3} vs expected {want} ({:.1}% > {:.0}%)",
                    arch.key(),
                    100.0 * err,
                    100.0 * tolerance
                ));
            }
        }
    }
    Ok(format!("worst error {:.1}% at {} (tolerance {:.0}%)", 100.0 * worst.0, worst.1, 100.0 * tolerance))
}

fn main() {
    eprintln!(
        "acceptance sweep: {} scenarios x {} architectures x {RUNS} seeds, normal + down + unstable",
        PRESET_NAMES.len(),
        Architecture::ALL.len()
    );
    let sweep = sweep();
    let mut failures = 0u32;

    criterion(1, "mean latency", &mut failures, || {
        let detail = check_table(&sweep, &EXPECTED_LATENCY_MS, LATENCY_TOL, |s| s.latency_ms.mean)?;
        if sweep.normal_elapsed > SWEEP_BUDGET {
            return Err(format!(
                "sweep took {:.0}s, budget {:.0}s",
                sweep.normal_elapsed.as_secs_f64(),
                SWEEP_BUDGET.as_secs_f64()
            ));
        }
        Ok(format!("{detail}; sweep {:.0}s", sweep.normal_elapsed.as_secs_f64()))
    });

    criterion(2, "daily energy", &mut failures, || {
        check_table(&sweep, &EXPECTED_ENERGY_WH, ENERGY_TOL, |s| s.energy_wh.mean)
    });

    criterion(3, "annual cost", &mut failures, || {
        let mut worst = (0.0f64, String::new());
        for (scenario, arch, want) in EXPECTED_COST_USD {
            let got = section(&sweep.normal[scenario], arch).annual_cost_usd.mean;
            let err = rel_err(got, want);
            if err > worst.0 {
                worst = (err, format!("{scenario}/{}", arch.key()));
            }
            if err > COST_TOL {
                return Err(format!(
                    "{scenario}/{}: simulated ${got:.2} vs expected ${want} ({:.1}% > {:.0}%)",
                    arch.key(),
                    100.0 * err,
                    100.0 * COST_TOL
                ));
            }
        }
        Ok(format!(
            "worst error {:.1}% at {} (tolerance {:.0}%)",
            100.0 * worst.0,
            worst.1,
            100.0 * COST_TOL
        ))
    });

    criterion(4, "processing locations", &mut failures, || {
        let report = &sweep.normal["drone_fleet"];
        let mut worst = 0.0f64;
        let mut check = |arch: Architecture, cells: &[(&str, f64)]| -> Result<(), String> {
            let s = section(report, arch);
            for (key, want_pct) in cells {
                let got = s.location_pct.get(*key).copied().unwrap_or(0.0);
                let err = (got - want_pct).abs();
                worst = worst.max(err);
                if err > LOCATION_TOL_PP {
                    return Err(format!(
                        "{}/{key}: simulated {got:.2}% vs expected {want_pct}% ({err:.2} pp > {LOCATION_TOL_PP} pp)",
                        arch.key()
                    ));
                }
            }
            Ok(())
        };
        check(Architecture::DfcAi, &EXPECTED_DFC_LOCATION_PCT)?;
        check(Architecture::GatewayEdge, &EXPECTED_GATEWAY_LOCATION_PCT)?;
        Ok(format!("worst error {worst:.2} pp (tolerance {LOCATION_TOL_PP} pp)"))
    });

    criterion(5, "outage resilience", &mut failures, || {
        let capability = |report: &ExperimentReport, arch: Architecture| -> Result<f64, String> {
            section(report, arch)
                .capability
                .as_ref()
                .map(|c| c.mean)
                .ok_or_else(|| format!("{}/{}: no capability measured", report.scenario, arch.key()))
        };
        for name in PRESET_NAMES {
            let down = &sweep.down[name];
            let cloud = capability(down, Architecture::CloudCentric)?;
            if cloud != 0.0 {
                return Err(format!("{name} down: cloud capability {cloud} != 0"));
            }
            let gw = capability(down, Architecture::GatewayEdge)?;
            if !(0.40..=0.42).contains(&gw) {
                return Err(format!("{name} down: gateway capability {gw:.4} outside [0.40, 0.42]"));
            }
            let dfc = capability(down, Architecture::DfcAi)?;
            if dfc < 0.98 {
                return Err(format!("{name} down: dfc capability {dfc:.4} < 0.98"));
            }

            let unstable = &sweep.unstable[name];
            let cloud = capability(unstable, Architecture::CloudCentric)?;
            if !(0.20..=0.40).contains(&cloud) {
                return Err(format!(
                    "{name} unstable: cloud capability {cloud:.4} outside [0.20, 0.40]"
                ));
            }
            let dfc = capability(unstable, Architecture::DfcAi)?;
            if dfc < 0.98 {
                return Err(format!("{name} unstable: dfc capability {dfc:.4} < 0.98"));
            }
        }
        Ok("cloud 0 exact / [0.20, 0.40] unstable; gateway [0.40, 0.42]; dfc >= 0.98".to_string())
    });

    criterion(6, "significance", &mut failures, || {
        let mut max_p = 0.0f64;
        for name in PRESET_NAMES {
            let report = &sweep.normal[name];
            for metric in ["latency_ms", "energy_wh", "annual_cost_usd"] {
                let cmp = report
                    .comparisons
                    .iter()
                    .find(|c| {
                        c.metric_id == metric
                            && c.a == Architecture::DfcAi
                            && c.b == Architecture::CloudCentric
                    })
                    .ok_or_else(|| format!("{name}: missing dfc-vs-cloud test on {metric}"))?;
                max_p = max_p.max(cmp.result.p_value);
                if !(cmp.result.p_value < 0.05 && cmp.result.significant) {
                    return Err(format!(
                        "{name}/{metric}: p = {:.3e} not significant at 0.05",
                        cmp.result.p_value
                    ));
                }
            }
        }
        Ok(format!("dfc vs cloud significant everywhere; max p = {max_p:.3e}"))
    });

    criterion(7, "theory agreement", &mut failures, || {
        let mut worst_latency = (0.0f64, String::new());
        let mut sim_savings = 0.0f64;
        let mut theory_savings = 0.0f64;
        for name in PRESET_NAMES {
            let report = &sweep.normal[name];
            for arch in Architecture::ALL {
                let s = section(report, arch);
                let err = rel_err(s.theory.latency_ms, s.latency_ms.mean);
                if err > worst_latency.0 {
                    worst_latency = (err, format!("{name}/{}", arch.key()));
                }
                if err > 0.20 {
                    return Err(format!(
                        "{name}/{}: theory {:.3} ms vs simulated {:.3} ms ({:.1}% > 20%)",
                        arch.key(),
                        s.theory.latency_ms,
                        s.latency_ms.mean,
                        100.0 * err
                    ));
                }
            }
            let cloud = section(report, Architecture::CloudCentric);
            let dfc = section(report, Architecture::DfcAi);
            sim_savings += 1.0 - dfc.energy_wh.mean / cloud.energy_wh.mean;
            theory_savings += 1.0 - dfc.theory.energy_wh / cloud.theory.energy_wh;
        }
        sim_savings /= PRESET_NAMES.len() as f64;
        theory_savings /= PRESET_NAMES.len() as f64;
        let savings_err = rel_err(theory_savings, sim_savings);
        if savings_err > 0.10 {
            return Err(format!(
                "average energy savings: theory {:.4} vs simulated {:.4} ({:.1}% > 10%)",
                theory_savings,
                sim_savings,
                100.0 * savings_err
            ));
        }
        Ok(format!(
            "worst latency error {:.1}% at {}; savings theory {:.4} vs simulated {:.4}",
            100.0 * worst_latency.0,
            worst_latency.1,
            theory_savings,
            sim_savings
        ))
    });

    criterion(8, "property suite", &mut failures, || {
        property_determinism()?;
        property_conservation(&sweep)?;
        property_breakdown_closure()?;
        property_transmission_linearity()?;
        property_beta_zero_independence()?;
        property_ci_coverage()?;
        property_p_value_uniformity()?;
        Ok("determinism, conservation, closure, linearity, beta-0 independence, \
            CI coverage, p uniformity"
            .to_string())
    });

    criterion(9, "statistics oracle", &mut failures, || {
        let t = common::run_t_distribution_oracle(100);
        let w = common::run_welch_oracle(100);
        let worst = t.max_rel_err.max(w.max_rel_err);
        if worst > 1e-6 {
            return Err(format!(
                "max relative error {worst:.3e} > 1e-6 over {} + {} cases",
                t.cases, w.cases
            ));
        }
        Ok(format!("max relative error {worst:.3e} over {} + {} cases", t.cases, w.cases))
    });

    if failures == 0 {
        println!("acceptance: all 9 criteria passed");
        std::process::exit(0);
    } else {
        println!("acceptance: {failures} criteria FAILED");
        std::process::exit(1);
    }
}

// --- criterion 8 properties -------------------------------------------------

/// Same invocation twice must write byte-identical report files.
fn property_determinism() -> Result<(), String> {
    let spec = ExperimentSpec {
        scenario: "drone_fleet".to_string(),
        architectures: Architecture::ALL.to_vec(),
        runs: 2,
        base_seed: BASE_SEED,
        duration_s: Some(3_600.0),
        outage: OutageSpec::AsConfigured,
        parallel: 1,
    };
    let formats = [ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json];
    let dir_a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir_b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = emit_report(&run_experiment(&spec).unwrap(), &formats, dir_a.path())
        .map_err(|e| e.to_string())?;
    let b = emit_report(&run_experiment(&spec).unwrap(), &formats, dir_b.path())
        .map_err(|e| e.to_string())?;
    for (pa, pb) in a.iter().zip(&b) {
        let bytes_a = std::fs::read(pa).map_err(|e| e.to_string())?;
        let bytes_b = std::fs::read(pb).map_err(|e| e.to_string())?;
        if bytes_a != bytes_b {
            return Err(format!("determinism: {} differs between identical runs", pa.display()));
        }
    }
    Ok(())
}

/// Every generated task ends as exactly one of completed/failed/deferred.
fn property_conservation(sweep: &Sweep) -> Result<(), String> {
    for report in sweep.normal.values().chain(sweep.down.values()).chain(sweep.unstable.values()) {
        for s in &report.architectures {
            for r in &s.runs {
                if r.generated != r.completed + r.failed + r.deferred {
                    return Err(format!(
                        "conservation: {}/{} seed {}: {} generated vs {}+{}+{}",
                        report.scenario,
                        s.architecture.key(),
                        r.seed,
                        r.generated,
                        r.completed,
                        r.failed,
                        r.deferred
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Energy and cost components must sum to their totals.
fn property_breakdown_closure() -> Result<(), String> {
    let cfg = ScenarioConfig::preset("drone_fleet").unwrap();
    for arch in Architecture::ALL {
        let metrics = run_simulation(&cfg, arch, BASE_SEED);
        let energy = account_energy(&cfg, &metrics);
        let tiers: f64 = energy.per_tier_wh.values().sum();
        let classes: f64 = energy.per_device_class_wh.values().sum();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        if !close(tiers, energy.e_transmission_wh) {
            return Err(format!(
                "closure: {} per-tier sum {tiers} != transmission {}",
                arch.key(),
                energy.e_transmission_wh
            ));
        }
        if !close(classes, energy.e_processing_wh) {
            return Err(format!(
                "closure: {} per-class sum {classes} != processing {}",
                arch.key(),
                energy.e_processing_wh
            ));
        }
        if !close(energy.total_wh(), energy.e_processing_wh + energy.e_transmission_wh) {
            return Err(format!("closure: {} energy total does not close", arch.key()));
        }
        let cost = account_cost(&cfg, &metrics);
        let parts =
            cost.c_compute_usd + cost.c_transfer_usd + cost.c_infrastructure_usd + cost.c_operations_usd;
        if !close(cost.total_usd(), parts) {
            return Err(format!("closure: {} cost total does not close", arch.key()));
        }
    }
    Ok(())
}

/// Doubling the bytes moved over a link doubles its transmission energy
/// exactly.
fn property_transmission_linearity() -> Result<(), String> {
    let cfg = ScenarioConfig::preset("drone_fleet").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for link in [&cfg.links.uplink, &cfg.links.local_network, &cfg.links.local_mesh] {
        for _ in 0..200 {
            let bytes = rng.random_range(1u64..1 << 40);
            let once = transmission_energy_wh(link, bytes);
            let twice = transmission_energy_wh(link, 2 * bytes);
            if twice.to_bits() != (2.0 * once).to_bits() {
                return Err(format!(
                    "linearity: E({}) = {twice} but 2 x E({bytes}) = {}",
                    2 * bytes,
                    2.0 * once
                ));
            }
        }
    }
    Ok(())
}

/// With no collaboration (beta = 0), locally processed task latencies must
/// not react to uplink parameters at all — bit-identical, not approximately.
fn property_beta_zero_independence() -> Result<(), String> {
    let base_json = continuum_sim::model::preset_json("drone_fleet").unwrap();
    let mut value: serde_json::Value = serde_json::from_str(base_json).unwrap();
    value["architectures"]["dfc"]["beta"] = 0.0.into();
    value["duration_s"] = 7_200.0.into();
    let base = ScenarioConfig::from_json_str(&value.to_string()).unwrap();

    value["links"]["uplink"]["bandwidth_mbps"] = 3.0.into();
    value["links"]["uplink"]["latency_min_ms"] = 900.0.into();
    value["links"]["uplink"]["latency_max_ms"] = 1_500.0.into();
    let perturbed = ScenarioConfig::from_json_str(&value.to_string()).unwrap();

    let a = run_simulation(&base, Architecture::DfcAi, BASE_SEED);
    let b = run_simulation(&perturbed, Architecture::DfcAi, BASE_SEED);
    for class in [TaskClass::Simple, TaskClass::Complex] {
        let (sa, sb) = (a.class_latency.get(&class), b.class_latency.get(&class));
        let (sa, sb) = (sa.ok_or("beta-0: class missing")?, sb.ok_or("beta-0: class missing")?);
        if sa.count != sb.count || sa.sum_ms.to_bits() != sb.sum_ms.to_bits() {
            return Err(format!(
                "beta-0 independence: {class:?} latency moved with uplink parameters \
                 ({} vs {})",
                sa.sum_ms, sb.sum_ms
            ));
        }
    }
    Ok(())
}

/// 95% confidence intervals on synthetic normal samples must cover the true
/// mean 95% ± 2 pp of the time.
fn property_ci_coverage() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1729);
    let mut normal = move || {
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let trials = 10_000;
    let mut covered = 0u32;
    for _ in 0..trials {
        let sample: Vec<f64> = (0..10).map(|_| 5.0 + 2.0 * normal()).collect();
        let s = summarize(&sample).map_err(|e| e.to_string())?;
        if (s.mean - 5.0).abs() <= s.ci95_half_width {
            covered += 1;
        }
    }
    let coverage = f64::from(covered) / trials as f64;
    if (coverage - 0.95).abs() > 0.02 {
        return Err(format!("CI coverage {coverage:.4} outside 0.95 ± 0.02"));
    }
    Ok(())
}

/// Welch p-values under the null hypothesis must be uniform: the
/// Kolmogorov–Smirnov statistic over 10,000 trials must stay below the 1%
/// critical value.
fn property_p_value_uniformity() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(271_828);
    let mut normal = move || {
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let trials = 10_000;
    let mut p_values = Vec::with_capacity(trials);
    for _ in 0..trials {
        let a: Vec<f64> = (0..10).map(|_| normal()).collect();
        let b: Vec<f64> = (0..10).map(|_| normal()).collect();
        p_values.push(welch_t_test(&a, &b).map_err(|e| e.to_string())?.p_value);
    }
    p_values.sort_by(f64::total_cmp);
    let n = p_values.len() as f64;
    let mut d = 0.0f64;
    for (i, p) in p_values.iter().enumerate() {
        let hi = (i + 1) as f64 / n;
        let lo = i as f64 / n;
        d = d.max((hi - p).abs()).max((p - lo).abs());
    }
    let critical = 1.63 / n.sqrt();
    if d > critical {
        return Err(format!("p-value KS statistic {d:.4} > {critical:.4} (1% critical value)"));
    }
    Ok(())
}
