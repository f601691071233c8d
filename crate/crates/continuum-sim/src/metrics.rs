//! Closed-form latency predictors and exact energy / cost accounting.
//!
//! Two halves share this module. The *predictors* compute expected mean
//! latency and energy from a scenario configuration alone — mean payloads,
//! midpoint propagation, emitter rates — and exist so simulated results can
//! be cross-checked against independent arithmetic. The *accountants* turn a
//! finished run's byte and busy-time counters into energy and money, exactly.
//!
//! Predictors use an open-network approximation: queueing delay is carried as
//! an explicit component but estimated as zero, which holds in the shipped
//! scenarios because every processor runs far below saturation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::RunMetrics;
use crate::model::{
    Architecture, ArchitectureParams, DeviceClass, EngineTuning, LinkSpec, LinkTier,
    MicroservicePowerProfile, ScenarioConfig, TaskCategory, TaskClass,
};
use crate::network;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("utilization {0} outside [0, 1]")]
    UtilizationOutOfRange(f64),
}

/// Additive latency components feeding the per-architecture closed forms.
///
/// Populate the fields that exist for the chosen architecture and leave the
/// rest zero; [`analytic_latency`] selects and sums the right ones.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    /// Device → cloud transfer (serialization plus propagation).
    pub uplink_ms: f64,
    /// Expected waiting time in processor queues.
    pub queue_ms: f64,
    /// Service time at the primary processing site.
    pub proc_ms: f64,
    /// Cloud → device result transfer.
    pub downlink_ms: f64,
    /// Device → gateway request leg.
    pub device_to_gateway_ms: f64,
    /// Gateway → device result leg.
    pub gateway_to_device_ms: f64,
    /// Full cloud round trip charged to the gateway's fallback share.
    pub cloud_roundtrip_ms: f64,
    /// One peer/cloud collaboration exchange, round trip.
    pub collab_ms: f64,
}

/// Expected end-to-end latency for one architecture given its components:
/// cloud-centric sums the four transfer/processing terms; gateway-edge adds
/// an `alpha`-weighted cloud round trip to its local legs; device-first is
/// local processing plus a `beta`-weighted collaboration exchange.
pub fn analytic_latency(params: &ArchitectureParams, b: &LatencyBreakdown) -> f64 {
    match params.architecture {
        Architecture::CloudCentric => b.uplink_ms + b.queue_ms + b.proc_ms + b.downlink_ms,
        Architecture::GatewayEdge => {
            b.device_to_gateway_ms
                + b.queue_ms
                + b.proc_ms
                + b.gateway_to_device_ms
                + params.alpha * b.cloud_roundtrip_ms
        }
        Architecture::DfcAi => b.queue_ms + b.proc_ms + params.beta * b.collab_ms,
    }
}

/// One task class's expected traffic contribution, pooled over all emitters.
struct ClassProfile {
    class: TaskClass,
    /// Share of all generated tasks.
    fraction: f64,
    /// Pooled arrival rate, tasks per second.
    rate_per_s: f64,
    payload_bytes: f64,
    result_bytes: f64,
    base_ms: f64,
}

/// Expected rate at which `device` emits `class`, tasks per second.
fn device_class_rate(cfg: &ScenarioConfig, device_idx: usize, class: TaskClass) -> f64 {
    cfg.devices[device_idx]
        .emitters
        .iter()
        .map(|e| {
            let rate = match e.arrival {
                crate::model::ArrivalProcess::Poisson { rate_per_s } => rate_per_s,
                crate::model::ArrivalProcess::Periodic { period_s } => 1.0 / period_s,
            };
            match e.task_class {
                Some(c) if c == class => rate,
                Some(_) => 0.0,
                None => rate * cfg.task_mixture.get(&class).copied().unwrap_or(0.0),
            }
        })
        .sum()
}

fn class_profiles(cfg: &ScenarioConfig) -> Vec<ClassProfile> {
    let mut profiles: Vec<ClassProfile> = cfg
        .task_classes
        .iter()
        .map(|(&class, spec)| {
            let rate_per_s: f64 =
                (0..cfg.devices.len()).map(|i| device_class_rate(cfg, i, class)).sum();
            ClassProfile {
                class,
                fraction: 0.0,
                rate_per_s,
                payload_bytes: spec.payload_bytes.mean_bytes(),
                result_bytes: spec.result_bytes as f64,
                base_ms: spec.base_proc_ms,
            }
        })
        .filter(|p| p.rate_per_s > 0.0)
        .collect();
    let total: f64 = profiles.iter().map(|p| p.rate_per_s).sum();
    for p in &mut profiles {
        p.fraction = p.rate_per_s / total;
    }
    profiles
}

/// Serialization time for an expected (fractional) byte count.
fn expected_serialization_ms(link: &LinkSpec, bytes: f64) -> f64 {
    bytes * 8.0 / (link.bandwidth_mbps * 1e6) * 1e3
}

/// Expected one-way traversal time, including the expected cost of the single
/// retry a sub-unity reliability occasionally triggers.
fn expected_leg_ms(link: &LinkSpec, bytes: f64, tuning: &EngineTuning) -> f64 {
    let once = expected_serialization_ms(link, bytes) + network::mean_propagation_ms(link);
    once + (1.0 - link.reliability) * (tuning.retry_backoff_ms + once)
}

/// Expected traversal attempts per successful leg (byte inflation factor).
fn expected_attempts(link: &LinkSpec) -> f64 {
    2.0 - link.reliability
}

/// Mean of `1 / processing_power` over the mesh GPU peers.
fn mean_inverse_gpu_power(cfg: &ScenarioConfig) -> Option<f64> {
    let gpus: Vec<f64> = cfg
        .devices
        .iter()
        .filter(|d| d.is_mesh_gpu())
        .map(|d| 1.0 / d.processing_power)
        .collect();
    (!gpus.is_empty()).then(|| gpus.iter().sum::<f64>() / gpus.len() as f64)
}

/// Expected latency components for a scenario under one architecture,
/// mixture-weighted across task classes. Feed to [`analytic_latency`].
pub fn predict_breakdown(cfg: &ScenarioConfig, arch: Architecture) -> LatencyBreakdown {
    let profiles = class_profiles(cfg);
    let params = cfg.architecture_params.get(arch);
    let uplink = &cfg.links.uplink;
    let local_net = &cfg.links.local_network;
    let mesh = &cfg.links.local_mesh;
    let tuning = &cfg.engine;
    let p_cloud = cfg.cloud_device().map_or(1.0, |(_, d)| d.processing_power);

    let mut b = LatencyBreakdown::default();
    for c in &profiles {
        let up = expected_leg_ms(uplink, c.payload_bytes, tuning);
        let down =
            if c.result_bytes > 0.0 { expected_leg_ms(uplink, c.result_bytes, tuning) } else { 0.0 };
        b.cloud_roundtrip_ms += c.fraction * (up + c.base_ms / p_cloud + down);
    }
    b.collab_ms = expected_leg_ms(uplink, params.collab_payload_bytes as f64, tuning)
        + network::mean_propagation_ms(uplink);

    match arch {
        Architecture::CloudCentric => {
            for c in &profiles {
                b.uplink_ms += c.fraction * expected_leg_ms(uplink, c.payload_bytes, tuning);
                b.proc_ms += c.fraction * c.base_ms / p_cloud;
                if c.result_bytes > 0.0 {
                    b.downlink_ms += c.fraction * expected_leg_ms(uplink, c.result_bytes, tuning);
                }
            }
        }
        Architecture::GatewayEdge => {
            let inv_gw: Vec<f64> =
                cfg.gateway_devices().map(|(_, d)| 1.0 / d.processing_power).collect();
            let mean_inv_gw =
                if inv_gw.is_empty() { 1.0 } else { inv_gw.iter().sum::<f64>() / inv_gw.len() as f64 };
            for c in &profiles {
                b.device_to_gateway_ms +=
                    c.fraction * expected_leg_ms(local_net, c.payload_bytes, tuning);
                b.proc_ms += c.fraction * c.base_ms * mean_inv_gw;
                if c.result_bytes > 0.0 {
                    b.gateway_to_device_ms +=
                        c.fraction * expected_leg_ms(local_net, c.result_bytes, tuning);
                }
            }
        }
        Architecture::DfcAi => {
            let mean_inv_gpu = mean_inverse_gpu_power(cfg);
            for c in &profiles {
                let path_ms = match c.class.category() {
                    TaskCategory::Local | TaskCategory::GpuBound => {
                        // Weight each emitting device by its share of this
                        // class; GPU-bound work from non-GPU origins adds the
                        // mesh legs and runs at the cluster GPUs' pace.
                        let mut acc = 0.0;
                        for i in 0..cfg.devices.len() {
                            let w = device_class_rate(cfg, i, c.class) / c.rate_per_s;
                            if w == 0.0 {
                                continue;
                            }
                            let d = &cfg.devices[i];
                            let local = c.base_ms / d.processing_power;
                            acc += w * match (c.class.category(), d.is_mesh_gpu(), mean_inv_gpu) {
                                (TaskCategory::GpuBound, false, Some(inv)) => {
                                    let mut t = expected_leg_ms(mesh, c.payload_bytes, tuning)
                                        + c.base_ms * inv;
                                    if c.result_bytes > 0.0 {
                                        t += expected_leg_ms(mesh, c.result_bytes, tuning);
                                    }
                                    t
                                }
                                _ => local,
                            };
                        }
                        acc
                    }
                    TaskCategory::CloudBound | TaskCategory::CriticalCloud => {
                        let up = expected_leg_ms(uplink, c.payload_bytes, tuning);
                        let down = if c.result_bytes > 0.0 {
                            expected_leg_ms(uplink, c.result_bytes, tuning)
                        } else {
                            0.0
                        };
                        up + c.base_ms / p_cloud + down
                    }
                };
                b.proc_ms += c.fraction * path_ms;
            }
        }
    }
    b
}

/// Predicted mean end-to-end latency for the scenario under `arch`.
pub fn predict_mean_latency_ms(cfg: &ScenarioConfig, arch: Architecture) -> f64 {
    analytic_latency(cfg.architecture_params.get(arch), &predict_breakdown(cfg, arch))
}

/// Predicted total energy (Wh) over `duration_s`, processing plus
/// transmission, from configuration alone.
pub fn predict_energy_wh(cfg: &ScenarioConfig, arch: Architecture, duration_s: f64) -> f64 {
    let profiles = class_profiles(cfg);
    let params = cfg.architecture_params.get(arch);
    let n = cfg.devices.len();
    let cloud_idx = cfg.cloud_device().map(|(i, _)| i);
    let gateways: Vec<usize> = cfg.gateway_devices().map(|(i, _)| i).collect();
    let gpus: Vec<usize> =
        (0..n).filter(|&i| cfg.devices[i].is_mesh_gpu()).collect();

    let mut busy_s = vec![0.0_f64; n];
    // Expected bytes per tier, both directions pooled.
    let mut tier_bytes = [0.0_f64; 3];
    let up_att = expected_attempts(&cfg.links.uplink);
    let ln_att = expected_attempts(&cfg.links.local_network);
    let mesh_att = expected_attempts(&cfg.links.local_mesh);

    match arch {
        Architecture::CloudCentric => {
            for c in &profiles {
                let tasks = c.rate_per_s * duration_s;
                if let Some(ci) = cloud_idx {
                    busy_s[ci] += tasks * c.base_ms / cfg.devices[ci].processing_power / 1e3;
                }
                tier_bytes[LinkTier::Uplink as usize] +=
                    tasks * (c.payload_bytes + c.result_bytes) * up_att;
            }
        }
        Architecture::GatewayEdge => {
            for c in &profiles {
                let tasks = c.rate_per_s * duration_s;
                for &g in &gateways {
                    busy_s[g] += tasks / gateways.len() as f64 * c.base_ms
                        / cfg.devices[g].processing_power
                        / 1e3;
                }
                tier_bytes[LinkTier::LocalNetwork as usize] +=
                    tasks * (c.payload_bytes + c.result_bytes) * ln_att;
                let forwarded = params.alpha * tasks;
                if let Some(ci) = cloud_idx {
                    busy_s[ci] += forwarded * c.base_ms / cfg.devices[ci].processing_power / 1e3;
                }
                tier_bytes[LinkTier::Uplink as usize] +=
                    forwarded * (c.payload_bytes + c.result_bytes) * up_att;
            }
        }
        Architecture::DfcAi => {
            let mut device_served_rate = 0.0;
            for c in &profiles {
                match c.class.category() {
                    TaskCategory::Local | TaskCategory::GpuBound => {
                        device_served_rate += c.rate_per_s;
                        for i in 0..n {
                            let rate = device_class_rate(cfg, i, c.class);
                            if rate == 0.0 {
                                continue;
                            }
                            let tasks = rate * duration_s;
                            let offload = c.class.category() == TaskCategory::GpuBound
                                && !cfg.devices[i].is_mesh_gpu()
                                && !gpus.is_empty();
                            if offload {
                                for &g in &gpus {
                                    busy_s[g] += tasks / gpus.len() as f64 * c.base_ms
                                        / cfg.devices[g].processing_power
                                        / 1e3;
                                }
                                tier_bytes[LinkTier::LocalMesh as usize] +=
                                    tasks * (c.payload_bytes + c.result_bytes) * mesh_att;
                            } else {
                                busy_s[i] +=
                                    tasks * c.base_ms / cfg.devices[i].processing_power / 1e3;
                            }
                        }
                    }
                    TaskCategory::CloudBound | TaskCategory::CriticalCloud => {
                        let tasks = c.rate_per_s * duration_s;
                        if let Some(ci) = cloud_idx {
                            busy_s[ci] += tasks * c.base_ms / cfg.devices[ci].processing_power / 1e3;
                        }
                        tier_bytes[LinkTier::Uplink as usize] +=
                            tasks * (c.payload_bytes + c.result_bytes) * up_att;
                    }
                }
            }
            tier_bytes[LinkTier::Uplink as usize] += params.beta
                * device_served_rate
                * duration_s
                * params.collab_payload_bytes as f64
                * up_att;
        }
    }

    let mut wh = 0.0;
    for (i, d) in cfg.devices.iter().enumerate() {
        let rho = (busy_s[i] / duration_s).min(1.0);
        for p in d.power_profile.iter().filter(|p| p.active_in.contains(&arch)) {
            wh += (p.p_idle_w + (p.p_active_w - p.p_idle_w) * rho) * duration_s / 3600.0;
        }
    }
    for (i, &tier) in LinkTier::ALL.iter().enumerate() {
        wh += tier_bytes[i] / 1e9 * cfg.links.get(tier).energy_wh_per_gb;
    }
    wh
}

/// Energy consumed during one run, split by origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// Device/service power integrated over the run.
    pub e_processing_wh: f64,
    /// Radio/NIC energy for all bytes moved.
    pub e_transmission_wh: f64,
    /// Transmission energy by network tier; sums to `e_transmission_wh`.
    pub per_tier_wh: BTreeMap<LinkTier, f64>,
    /// Processing energy by device class; sums to `e_processing_wh`.
    pub per_device_class_wh: BTreeMap<DeviceClass, f64>,
}

impl EnergyBreakdown {
    pub fn total_wh(&self) -> f64 {
        self.e_processing_wh + self.e_transmission_wh
    }
}

/// Power integral of a set of microservice profiles over `duration_s`,
/// using each profile's measured utilization share.
pub fn energy_microservices(
    profiles: &[MicroservicePowerProfile],
    duration_s: f64,
) -> Result<f64, MetricsError> {
    let mut wh = 0.0;
    for p in profiles {
        if !(0.0..=1.0).contains(&p.rho) {
            return Err(MetricsError::UtilizationOutOfRange(p.rho));
        }
        wh += (p.p_idle_w * (1.0 - p.rho) + p.p_active_w * p.rho) * duration_s / 3600.0;
    }
    Ok(wh)
}

/// Exact energy accounting for a finished run: every device's power profile
/// at its measured utilization, plus the per-tier transmission tariff on
/// every byte that moved.
pub fn account_energy(cfg: &ScenarioConfig, metrics: &RunMetrics) -> EnergyBreakdown {
    let arch = metrics.architecture;
    let duration = metrics.duration_s;
    let mut e_processing_wh = 0.0;
    let mut per_device_class_wh: BTreeMap<DeviceClass, f64> = BTreeMap::new();
    for (i, d) in cfg.devices.iter().enumerate() {
        let rho = (metrics.device_busy_s[i] / duration).min(1.0);
        let profiles: Vec<MicroservicePowerProfile> = d
            .power_profile
            .iter()
            .filter(|p| p.active_in.contains(&arch))
            .map(|p| MicroservicePowerProfile { rho, ..p.clone() })
            .collect();
        let wh = energy_microservices(&profiles, duration).expect("utilization clamped to [0, 1]");
        if wh > 0.0 {
            e_processing_wh += wh;
            *per_device_class_wh.entry(d.class).or_default() += wh;
        }
    }
    let mut e_transmission_wh = 0.0;
    let mut per_tier_wh = BTreeMap::new();
    for &tier in &LinkTier::ALL {
        let bytes = metrics.bytes_up.get(&tier).copied().unwrap_or(0)
            + metrics.bytes_down.get(&tier).copied().unwrap_or(0);
        if bytes > 0 {
            let wh = network::transmission_energy_wh(cfg.links.get(tier), bytes);
            e_transmission_wh += wh;
            per_tier_wh.insert(tier, wh);
        }
    }
    EnergyBreakdown { e_processing_wh, e_transmission_wh, per_tier_wh, per_device_class_wh }
}

/// Annualized operating cost, extrapolated from one run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Metered compute: cloud GPU hours, rented edge hours, and third-party
    /// device hours. Enterprise-owned device compute costs nothing.
    pub c_compute_usd: f64,
    /// Cloud data transfer on upstream backhaul bytes.
    pub c_transfer_usd: f64,
    /// Fixed daily maintenance floor for dedicated gateway infrastructure.
    pub c_infrastructure_usd: f64,
    /// Amortized per-device upkeep.
    pub c_operations_usd: f64,
}

impl CostBreakdown {
    pub fn total_usd(&self) -> f64 {
        self.c_compute_usd + self.c_transfer_usd + self.c_infrastructure_usd + self.c_operations_usd
    }
}

/// Annual operating cost of running the scenario as measured: busy-hour
/// metering for cloud (always) and gateway hardware (when operating as the
/// rented gateway tier), upstream backhaul gigabytes at the egress rate, the
/// gateway tier's daily maintenance floor, and per-device upkeep. Run totals
/// are scaled to a day and extrapolated over 365 days.
pub fn account_cost(cfg: &ScenarioConfig, metrics: &RunMetrics) -> CostBreakdown {
    let arch = metrics.architecture;
    let per_year = 86_400.0 / metrics.duration_s * 365.0;
    let pricing = &cfg.pricing;

    let mut cloud_h = 0.0;
    let mut edge_h = 0.0;
    let mut third_party_h = 0.0;
    let mut enterprise_devices = 0u32;
    for (i, d) in cfg.devices.iter().enumerate() {
        let h = metrics.device_busy_s[i] / 3600.0;
        if d.class == DeviceClass::Cloud {
            cloud_h += h;
        } else if d.gateway_role && arch == Architecture::GatewayEdge {
            edge_h += h;
        } else if !d.owned_by_enterprise {
            third_party_h += h;
        }
        if d.owned_by_enterprise {
            enterprise_devices += 1;
        }
    }
    let c_compute_usd = (cloud_h * pricing.cloud_gpu_per_hour
        + edge_h * pricing.edge_server_per_hour
        + third_party_h * pricing.device_compute_per_hour)
        * per_year;
    let uplink_up_gb =
        metrics.bytes_up.get(&LinkTier::Uplink).copied().unwrap_or(0) as f64 / 1e9;
    let c_transfer_usd = uplink_up_gb * pricing.cloud_egress_per_gb * per_year;
    let c_infrastructure_usd = if arch == Architecture::GatewayEdge {
        pricing.edge_maintenance_hours_per_day * pricing.edge_maintenance_per_hour * 365.0
    } else {
        0.0
    };
    let c_operations_usd = enterprise_devices as f64 * pricing.device_upkeep_per_day * 365.0;
    CostBreakdown { c_compute_usd, c_transfer_usd, c_infrastructure_usd, c_operations_usd }
}
