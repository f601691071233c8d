//! Scenario configuration: the device fleet, task taxonomy, link properties,
//! architecture parameters, pricing, and outage schedule that together define
//! one simulated deployment.
//!
//! Configurations are written as JSON documents (see `scenarios/` at the
//! repository root for the three shipped presets) and pass through
//! [`validate_scenario`] before anything else touches them. Validation expands
//! replicated device entries, fills defaults, resolves string names to typed
//! enums, and rejects inconsistent documents with errors that name the
//! offending key path.
//!
//! Every input of the latency, energy, and cost accounting is addressable from
//! a validated [`ScenarioConfig`]:
//!
//! ```
//! use continuum_sim::model::{Architecture, LinkTier, ScenarioConfig};
//!
//! let cfg = ScenarioConfig::preset("drone_fleet").unwrap();
//! // Network terms: serialization is payload over bandwidth, propagation is a
//! // uniform draw between the one-way latency bounds, and each tier carries a
//! // transmission-energy tariff.
//! let up = cfg.links.get(LinkTier::Uplink);
//! assert!(up.bandwidth_mbps > 0.0 && up.latency_min_ms <= up.latency_max_ms);
//! assert_eq!(up.energy_wh_per_gb, 0.6);
//! // Processing terms: per-class base time scaled by device processing power.
//! assert_eq!(cfg.task_classes[&continuum_sim::model::TaskClass::Simple].base_proc_ms, 10.0);
//! assert!(cfg.devices.iter().any(|d| d.processing_power >= 10.0));
//! // Fallback and collaboration shares for the two hybrid architectures.
//! let gw = cfg.architecture_params.get(Architecture::GatewayEdge);
//! let dfc = cfg.architecture_params.get(Architecture::DfcAi);
//! assert!(gw.alpha > 0.0 && dfc.beta > 0.0 && dfc.beta < 0.2);
//! // Power model: idle/active watts per microservice, utilization measured.
//! let profile = &cfg.devices[0].power_profile[0];
//! assert!(profile.p_idle_w <= profile.p_active_w);
//! // Billing rates for compute, transfer, and edge upkeep.
//! assert_eq!(cfg.pricing.cloud_gpu_per_hour, 3.50);
//! assert_eq!(cfg.pricing.cloud_egress_per_gb, 0.09);
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{path}: task mixture sums to {sum}, expected 1 (±1e-9)")]
    MixtureNotNormalized { path: String, sum: f64 },
    /// A numeric field is negative, zero where positivity is required, or
    /// otherwise outside its allowed range; `detail` states the constraint.
    #[error("{path}: {detail}")]
    NegativeParameter { path: String, detail: String },
    #[error("{path}: unknown device class `{found}`")]
    UnknownDeviceClass { path: String, found: String },
    #[error("{path}: unknown task class `{found}`")]
    UnknownTaskClass { path: String, found: String },
    #[error("{path}: outage windows overlap")]
    OverlappingOutageWindows { path: String },
    #[error("{path}: {detail}")]
    Inconsistent { path: String, detail: String },
    #[error("failed to parse scenario document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("failed to read `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// The three shipped deployments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    DroneFleet,
    SensorNetwork,
    WorkerSafety,
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScenarioName::DroneFleet => "drone_fleet",
            ScenarioName::SensorNetwork => "sensor_network",
            ScenarioName::WorkerSafety => "worker_safety",
        };
        f.write_str(s)
    }
}

/// Hardware classes a device can belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DeviceClass {
    SimpleSensor,
    SmartSensor,
    CpuDevice,
    GpuDevice,
    Gateway,
    EdgeServer,
    Cloud,
    Wearable,
    Camera,
    Vehicle,
    MiniPcGpu,
}

impl DeviceClass {
    /// Accelerated classes; these must declare `processing_power >= 10`.
    pub fn is_gpu_class(self) -> bool {
        matches!(
            self,
            DeviceClass::GpuDevice | DeviceClass::MiniPcGpu | DeviceClass::EdgeServer | DeviceClass::Cloud
        )
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "SimpleSensor" => Self::SimpleSensor,
            "SmartSensor" => Self::SmartSensor,
            "CpuDevice" => Self::CpuDevice,
            "GpuDevice" => Self::GpuDevice,
            "Gateway" => Self::Gateway,
            "EdgeServer" => Self::EdgeServer,
            "Cloud" => Self::Cloud,
            "Wearable" => Self::Wearable,
            "Camera" => Self::Camera,
            "Vehicle" => Self::Vehicle,
            "MiniPcGpu" => Self::MiniPcGpu,
            _ => return None,
        })
    }
}

/// Workload classes across all scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskClass {
    Simple,
    Complex,
    CloudOnly,
    Normal,
    Anomaly,
    Critical,
    VitalSign,
    VideoFrame,
}

impl TaskClass {
    pub const ALL: [TaskClass; 8] = [
        TaskClass::Simple,
        TaskClass::Complex,
        TaskClass::CloudOnly,
        TaskClass::Normal,
        TaskClass::Anomaly,
        TaskClass::Critical,
        TaskClass::VitalSign,
        TaskClass::VideoFrame,
    ];

    /// Routing behaviour of the class under the device-first architecture.
    pub fn category(self) -> TaskCategory {
        match self {
            TaskClass::Simple | TaskClass::Normal | TaskClass::VitalSign => TaskCategory::Local,
            TaskClass::Complex | TaskClass::Anomaly | TaskClass::VideoFrame => TaskCategory::GpuBound,
            TaskClass::CloudOnly => TaskCategory::CloudBound,
            TaskClass::Critical => TaskCategory::CriticalCloud,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| format!("{c:?}") == s)
    }
}

impl fmt::Display for TaskClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// How a task class behaves when routing keeps work near its origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskCategory {
    /// Runs on the device that produced it.
    Local,
    /// Needs an accelerator: shipped to a discovered GPU peer.
    GpuBound,
    /// Cloud by definition (e.g. long-horizon analysis); deferrable work.
    CloudBound,
    /// Escalates to the cloud and cannot be deferred.
    CriticalCloud,
}

/// Where a task ended up being processed (or why it did not complete).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProcessedAt {
    OriginDevice,
    ClusterGpu,
    Gateway,
    EdgeServer,
    Cloud,
    Failed,
    Deferred,
}

impl ProcessedAt {
    pub const ALL: [ProcessedAt; 7] = [
        ProcessedAt::OriginDevice,
        ProcessedAt::ClusterGpu,
        ProcessedAt::Gateway,
        ProcessedAt::EdgeServer,
        ProcessedAt::Cloud,
        ProcessedAt::Failed,
        ProcessedAt::Deferred,
    ];

    /// Short name used in trace routes, report tables, and reference files.
    pub fn key(self) -> &'static str {
        match self {
            ProcessedAt::OriginDevice => "origin_device",
            ProcessedAt::ClusterGpu => "cluster_gpu",
            ProcessedAt::Gateway => "gateway",
            ProcessedAt::EdgeServer => "edge_server",
            ProcessedAt::Cloud => "cloud",
            ProcessedAt::Failed => "failed",
            ProcessedAt::Deferred => "deferred",
        }
    }
}

/// The three architectures under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    CloudCentric,
    GatewayEdge,
    DfcAi,
}

impl Architecture {
    pub const ALL: [Architecture; 3] =
        [Architecture::CloudCentric, Architecture::GatewayEdge, Architecture::DfcAi];

    /// Short name used in CLI arguments, JSON keys, and report tables.
    pub fn key(self) -> &'static str {
        match self {
            Architecture::CloudCentric => "cloud",
            Architecture::GatewayEdge => "gateway",
            Architecture::DfcAi => "dfc",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Architecture::CloudCentric => "Cloud-Centric",
            Architecture::GatewayEdge => "Gateway-Edge",
            Architecture::DfcAi => "DFC-AI",
        }
    }
}

/// Network tiers a traversal can use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkTier {
    LocalMesh,
    LocalNetwork,
    Uplink,
}

impl LinkTier {
    pub const ALL: [LinkTier; 3] = [LinkTier::LocalMesh, LinkTier::LocalNetwork, LinkTier::Uplink];
}

/// One network tier's properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    #[serde(default = "default_tier")]
    pub tier: LinkTier,
    pub bandwidth_mbps: f64,
    /// One-way propagation bounds; each traversal draws uniformly between them.
    pub latency_min_ms: f64,
    pub latency_max_ms: f64,
    /// Probability a traversal attempt succeeds under normal conditions.
    #[serde(default = "one")]
    pub reliability: f64,
    /// Transmission energy tariff, Wh per decimal GB, covering device and
    /// network infrastructure.
    pub energy_wh_per_gb: f64,
    /// Probability the tier is usable for a given task while the backhaul is
    /// degraded (only meaningful for the uplink).
    #[serde(default = "default_unstable_availability")]
    pub unstable_availability: f64,
}

fn default_tier() -> LinkTier {
    LinkTier::Uplink
}
fn one() -> f64 {
    1.0
}
fn default_unstable_availability() -> f64 {
    0.35
}

/// The scenario's three link tiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkTable {
    pub uplink: LinkSpec,
    pub local_network: LinkSpec,
    pub local_mesh: LinkSpec,
}

impl LinkTable {
    pub fn get(&self, tier: LinkTier) -> &LinkSpec {
        match tier {
            LinkTier::Uplink => &self.uplink,
            LinkTier::LocalNetwork => &self.local_network,
            LinkTier::LocalMesh => &self.local_mesh,
        }
    }
}

/// Per-architecture routing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureParams {
    #[serde(default = "default_architecture")]
    pub architecture: Architecture,
    /// Fraction of gateway-handled tasks that additionally fall back to the
    /// cloud for processing the gateway cannot finish.
    #[serde(default)]
    pub alpha: f64,
    /// Probability a device-processed task adds an external collaboration
    /// exchange on top of its local work.
    #[serde(default)]
    pub beta: f64,
    /// Probability a pre-cached model can serve a task at the gateway while
    /// the backhaul is down.
    #[serde(default = "default_precache")]
    pub precache_hit_probability: f64,
    /// Payload of one collaboration exchange.
    #[serde(default = "default_collab_payload")]
    pub collab_payload_bytes: u64,
}

fn default_architecture() -> Architecture {
    Architecture::CloudCentric
}
fn default_precache() -> f64 {
    0.41
}
fn default_collab_payload() -> u64 {
    10_000
}

/// Routing parameters for all three architectures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureTable {
    pub cloud: ArchitectureParams,
    pub gateway: ArchitectureParams,
    pub dfc: ArchitectureParams,
}

impl ArchitectureTable {
    pub fn get(&self, arch: Architecture) -> &ArchitectureParams {
        match arch {
            Architecture::CloudCentric => &self.cloud,
            Architecture::GatewayEdge => &self.gateway,
            Architecture::DfcAi => &self.dfc,
        }
    }
}

/// Billing rates. Compute is billed on busy time; the maintenance floor bills
/// a fixed number of hours per day for dedicated gateway infrastructure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingTable {
    pub cloud_gpu_per_hour: f64,
    pub edge_server_per_hour: f64,
    pub edge_maintenance_per_hour: f64,
    /// Rate for compute on devices not owned by the enterprise; enterprise
    /// devices contribute zero compute cost.
    #[serde(default)]
    pub device_compute_per_hour: f64,
    pub cloud_egress_per_gb: f64,
    /// Daily maintenance floor for dedicated edge infrastructure, in hours.
    #[serde(default)]
    pub edge_maintenance_hours_per_day: f64,
    /// Amortized per-device upkeep per day (defaults to none).
    #[serde(default)]
    pub device_upkeep_per_day: f64,
}

/// One microservice's contribution to a device's power draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroservicePowerProfile {
    pub service_id: String,
    /// Architectures under which this service is deployed on the device.
    pub active_in: Vec<Architecture>,
    pub p_idle_w: f64,
    pub p_active_w: f64,
    /// Utilization share in [0, 1]; zero in configuration, measured per run.
    #[serde(default)]
    pub rho: f64,
}

/// How a device emits tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    /// `None` draws the class from the scenario task mixture.
    pub task_class: Option<TaskClass>,
    pub arrival: ArrivalProcess,
}

/// Arrival process of one emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalProcess {
    /// Independent Poisson arrivals at the given rate.
    Poisson { rate_per_s: f64 },
    /// Deterministic arrivals every `period_s`, phase-randomized per device.
    Periodic { period_s: f64 },
}

/// One device (after expansion of replicated entries).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub id: String,
    pub class: DeviceClass,
    /// Speed multiplier applied to per-class base processing times.
    pub processing_power: f64,
    pub owned_by_enterprise: bool,
    /// Whether the device participates in the local mesh cluster.
    pub mesh_member: bool,
    /// Whether the device serves as the gateway-architecture processor.
    pub gateway_role: bool,
    /// Parallel service slots when this device processes queued tasks.
    pub servers: u32,
    pub power_profile: Vec<MicroservicePowerProfile>,
    pub emitters: Vec<EmitterSpec>,
}

impl DeviceSpec {
    /// GPU peers discoverable over the mesh for accelerator-bound work.
    pub fn is_mesh_gpu(&self) -> bool {
        self.mesh_member && self.class.is_gpu_class()
    }
}

/// Payload size of a task class: fixed or uniform between bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PayloadSpec {
    Const(u64),
    Uniform { min_bytes: u64, max_bytes: u64 },
}

impl PayloadSpec {
    pub fn mean_bytes(self) -> f64 {
        match self {
            PayloadSpec::Const(b) => b as f64,
            PayloadSpec::Uniform { min_bytes, max_bytes } => (min_bytes + max_bytes) as f64 / 2.0,
        }
    }
}

/// Static properties of one task class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskClassSpec {
    pub payload_bytes: PayloadSpec,
    /// Processing time on a `processing_power = 1.0` device.
    pub base_proc_ms: f64,
    /// Response payload returned to the origin; zero means fire-and-forget
    /// telemetry with no downlink leg.
    #[serde(default)]
    pub result_bytes: u64,
    #[serde(default)]
    pub deadline_ms: Option<f64>,
    /// Deferrable work survives outages as a backlog instead of failing, and
    /// is excluded from operational-capability accounting.
    #[serde(default)]
    pub deferrable: bool,
}

/// Degraded network modes; normal operation is the absence of a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutageMode {
    Unstable,
    Down,
}

/// A half-open interval `[start_s, end_s)` of degraded connectivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageWindow {
    pub start_s: f64,
    pub end_s: f64,
    pub mode: OutageMode,
}

/// Fixed engine behaviour knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineTuning {
    /// Wait before the single retry of a failed traversal in normal mode.
    #[serde(default = "default_backoff")]
    pub retry_backoff_ms: f64,
    /// Delay between a device joining the mesh and peers being able to route
    /// work to it.
    #[serde(default = "default_discovery")]
    pub discovery_delay_s: f64,
}

fn default_backoff() -> f64 {
    100.0
}
fn default_discovery() -> f64 {
    0.5
}

impl Default for EngineTuning {
    fn default() -> Self {
        EngineTuning { retry_backoff_ms: default_backoff(), discovery_delay_s: default_discovery() }
    }
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: ScenarioName,
    pub duration_s: f64,
    /// Default Poisson rate for emitters that do not declare their own.
    pub arrival_rate_per_device: f64,
    pub devices: Vec<DeviceSpec>,
    /// Class probabilities for mixture emitters; for scenarios whose emitters
    /// all declare fixed classes this holds the derived expected fractions.
    pub task_mixture: BTreeMap<TaskClass, f64>,
    pub task_classes: BTreeMap<TaskClass, TaskClassSpec>,
    pub links: LinkTable,
    #[serde(rename = "architectures")]
    pub architecture_params: ArchitectureTable,
    pub pricing: PricingTable,
    #[serde(default)]
    pub engine: EngineTuning,
    #[serde(default)]
    pub outage_windows: Vec<OutageWindow>,
}

impl ScenarioConfig {
    /// Parses and validates a JSON scenario document.
    pub fn from_json_str(json: &str) -> Result<Self, ModelError> {
        let raw: RawScenario = serde_json::from_str(json)?;
        validate_scenario(raw)
    }

    /// Loads a scenario from a file path.
    pub fn from_path(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// Loads one of the shipped presets by name
    /// (`drone_fleet`, `sensor_network`, `worker_safety`).
    pub fn preset(name: &str) -> Result<Self, ModelError> {
        let json = preset_json(name).ok_or_else(|| ModelError::Inconsistent {
            path: "scenario".into(),
            detail: format!("no preset named `{name}` (expected drone_fleet, sensor_network, or worker_safety)"),
        })?;
        Self::from_json_str(json)
    }

    /// The device serving the gateway architecture, if any.
    pub fn gateway_devices(&self) -> impl Iterator<Item = (usize, &DeviceSpec)> {
        self.devices.iter().enumerate().filter(|(_, d)| d.gateway_role)
    }

    pub fn cloud_device(&self) -> Option<(usize, &DeviceSpec)> {
        self.devices.iter().enumerate().find(|(_, d)| d.class == DeviceClass::Cloud)
    }

    /// Expected share of each task class over one run, derived from emitter
    /// rates and the mixture. Used by the analytic predictors.
    pub fn expected_class_fractions(&self) -> BTreeMap<TaskClass, f64> {
        expected_class_fractions(&self.devices, self.arrival_rate_per_device, &self.task_mixture, self.duration_s)
    }
}

/// Raw JSON text of the shipped presets, compiled into the binary.
pub fn preset_json(name: &str) -> Option<&'static str> {
    match name {
        "drone_fleet" => Some(include_str!(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../scenarios/drone_fleet.json"
        ))),
        "sensor_network" => Some(include_str!(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../scenarios/sensor_network.json"
        ))),
        "worker_safety" => Some(include_str!(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../scenarios/worker_safety.json"
        ))),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 3] = ["drone_fleet", "sensor_network", "worker_safety"];

// ---------------------------------------------------------------------------
// Raw document shapes (pre-validation).
// ---------------------------------------------------------------------------

/// Scenario document as written on disk, before defaulting and expansion.
#[derive(Debug, Clone, Deserialize)]
pub struct RawScenario {
    pub name: String,
    pub duration_s: f64,
    #[serde(default)]
    pub arrival_rate_per_device: f64,
    pub devices: Vec<RawDevice>,
    #[serde(default)]
    pub task_mixture: BTreeMap<String, f64>,
    pub task_classes: BTreeMap<String, TaskClassSpec>,
    pub links: LinkTable,
    pub architectures: ArchitectureTable,
    pub pricing: PricingTable,
    #[serde(default)]
    pub engine: EngineTuning,
    #[serde(default)]
    pub outage_windows: Vec<OutageWindow>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RawDevice {
    pub id: String,
    pub class: String,
    /// Number of identical devices this entry expands to (ids get suffixed).
    #[serde(default = "one_u32")]
    pub count: u32,
    pub processing_power: f64,
    #[serde(default = "default_true")]
    pub owned_by_enterprise: bool,
    /// Defaults by class: infrastructure stays out of the mesh, devices join.
    #[serde(default)]
    pub mesh_member: Option<bool>,
    #[serde(default)]
    pub roles: Vec<String>,
    /// Alternative to `roles: ["gateway"]`; takes precedence when present.
    #[serde(default)]
    pub gateway_role: Option<bool>,
    #[serde(default)]
    pub servers: Option<u32>,
    #[serde(default)]
    pub power_profile: Vec<MicroservicePowerProfile>,
    #[serde(default)]
    pub emitters: Vec<RawEmitter>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RawEmitter {
    /// A task-class name; `"mixture"` or omission draws from the mixture.
    #[serde(default)]
    pub task_class: Option<String>,
    /// Defaults to Poisson at the scenario's `arrival_rate_per_device`.
    #[serde(default)]
    pub arrival: Option<ArrivalProcess>,
}

fn one_u32() -> u32 {
    1
}
fn default_true() -> bool {
    true
}

// ---------------------------------------------------------------------------
// Validation.
// ---------------------------------------------------------------------------

fn require_finite(path: &str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NegativeParameter { path: path.into(), detail: format!("must be finite, got {value}") })
    }
}

fn require_non_negative(path: &str, value: f64) -> Result<(), ModelError> {
    require_finite(path, value)?;
    if value < 0.0 {
        return Err(ModelError::NegativeParameter { path: path.into(), detail: format!("must be >= 0, got {value}") });
    }
    Ok(())
}

fn require_positive(path: &str, value: f64) -> Result<(), ModelError> {
    require_finite(path, value)?;
    if value <= 0.0 {
        return Err(ModelError::NegativeParameter { path: path.into(), detail: format!("must be > 0, got {value}") });
    }
    Ok(())
}

fn require_probability(path: &str, value: f64) -> Result<(), ModelError> {
    require_finite(path, value)?;
    if !(0.0..=1.0).contains(&value) {
        return Err(ModelError::NegativeParameter {
            path: path.into(),
            detail: format!("must lie in [0, 1], got {value}"),
        });
    }
    Ok(())
}

fn validate_link(path: &str, tier: LinkTier, mut link: LinkSpec) -> Result<LinkSpec, ModelError> {
    link.tier = tier;
    require_positive(&format!("{path}.bandwidth_mbps"), link.bandwidth_mbps)?;
    require_non_negative(&format!("{path}.latency_min_ms"), link.latency_min_ms)?;
    require_non_negative(&format!("{path}.latency_max_ms"), link.latency_max_ms)?;
    if link.latency_min_ms > link.latency_max_ms {
        return Err(ModelError::NegativeParameter {
            path: format!("{path}.latency_min_ms"),
            detail: format!(
                "latency bounds inverted: min {} > max {}",
                link.latency_min_ms, link.latency_max_ms
            ),
        });
    }
    require_finite(&format!("{path}.reliability"), link.reliability)?;
    if !(link.reliability > 0.0 && link.reliability <= 1.0) {
        return Err(ModelError::NegativeParameter {
            path: format!("{path}.reliability"),
            detail: format!("must lie in (0, 1], got {}", link.reliability),
        });
    }
    require_non_negative(&format!("{path}.energy_wh_per_gb"), link.energy_wh_per_gb)?;
    require_probability(&format!("{path}.unstable_availability"), link.unstable_availability)?;
    Ok(link)
}

fn validate_arch_params(
    path: &str,
    arch: Architecture,
    mut params: ArchitectureParams,
) -> Result<ArchitectureParams, ModelError> {
    params.architecture = arch;
    require_probability(&format!("{path}.alpha"), params.alpha)?;
    require_probability(&format!("{path}.beta"), params.beta)?;
    require_probability(&format!("{path}.precache_hit_probability"), params.precache_hit_probability)?;
    Ok(params)
}

/// Checks a raw scenario document, fills defaults, expands replicated device
/// entries, and produces the typed configuration the rest of the crate uses.
pub fn validate_scenario(raw: RawScenario) -> Result<ScenarioConfig, ModelError> {
    let name = match raw.name.as_str() {
        "drone_fleet" => ScenarioName::DroneFleet,
        "sensor_network" => ScenarioName::SensorNetwork,
        "worker_safety" => ScenarioName::WorkerSafety,
        other => {
            return Err(ModelError::Inconsistent {
                path: "name".into(),
                detail: format!("unknown scenario name `{other}`"),
            })
        }
    };

    require_positive("duration_s", raw.duration_s)?;
    require_non_negative("arrival_rate_per_device", raw.arrival_rate_per_device)?;

    if raw.devices.is_empty() {
        return Err(ModelError::NegativeParameter {
            path: "devices".into(),
            detail: "scenario declares no devices".into(),
        });
    }

    // Task classes.
    let mut task_classes = BTreeMap::new();
    for (key, spec) in &raw.task_classes {
        let class = TaskClass::parse(key).ok_or_else(|| ModelError::UnknownTaskClass {
            path: format!("task_classes.{key}"),
            found: key.clone(),
        })?;
        let path = format!("task_classes.{key}");
        match spec.payload_bytes {
            PayloadSpec::Const(b) => {
                if b == 0 {
                    return Err(ModelError::NegativeParameter {
                        path: format!("{path}.payload_bytes"),
                        detail: "payload must be positive".into(),
                    });
                }
            }
            PayloadSpec::Uniform { min_bytes, max_bytes } => {
                if min_bytes == 0 || min_bytes > max_bytes {
                    return Err(ModelError::NegativeParameter {
                        path: format!("{path}.payload_bytes"),
                        detail: format!("uniform payload bounds invalid: [{min_bytes}, {max_bytes}]"),
                    });
                }
            }
        }
        require_positive(&format!("{path}.base_proc_ms"), spec.base_proc_ms)?;
        if let Some(d) = spec.deadline_ms {
            require_positive(&format!("{path}.deadline_ms"), d)?;
        }
        task_classes.insert(class, spec.clone());
    }

    // Devices: expand `count` entries and resolve classes/roles.
    let mut devices = Vec::new();
    let mut uses_mixture = false;
    for (i, d) in raw.devices.iter().enumerate() {
        let dev_path = format!("devices[{i}]");
        let class = DeviceClass::parse(&d.class).ok_or_else(|| ModelError::UnknownDeviceClass {
            path: format!("{dev_path}.class"),
            found: d.class.clone(),
        })?;
        require_positive(&format!("{dev_path}.processing_power"), d.processing_power)?;
        if class.is_gpu_class() && d.processing_power < 10.0 {
            return Err(ModelError::NegativeParameter {
                path: format!("{dev_path}.processing_power"),
                detail: format!("GPU-class devices need processing_power >= 10, got {}", d.processing_power),
            });
        }
        if d.count == 0 {
            return Err(ModelError::NegativeParameter {
                path: format!("{dev_path}.count"),
                detail: "count must be >= 1".into(),
            });
        }

        let mut gateway_role = false;
        for (j, role) in d.roles.iter().enumerate() {
            match role.as_str() {
                "gateway" => gateway_role = true,
                other => {
                    return Err(ModelError::Inconsistent {
                        path: format!("{dev_path}.roles[{j}]"),
                        detail: format!("unknown role `{other}` (expected `gateway`)"),
                    })
                }
            }
        }
        if let Some(flag) = d.gateway_role {
            gateway_role = flag;
        }
        let mesh_member = d.mesh_member.unwrap_or(!matches!(
            class,
            DeviceClass::Cloud | DeviceClass::Gateway | DeviceClass::EdgeServer
        ));
        let servers = d.servers.unwrap_or(match class {
            DeviceClass::Cloud => 4,
            _ if gateway_role => 2,
            _ => 1,
        });
        if servers == 0 {
            return Err(ModelError::NegativeParameter {
                path: format!("{dev_path}.servers"),
                detail: "servers must be >= 1".into(),
            });
        }

        for (j, p) in d.power_profile.iter().enumerate() {
            let p_path = format!("{dev_path}.power_profile[{j}]");
            require_non_negative(&format!("{p_path}.p_idle_w"), p.p_idle_w)?;
            require_non_negative(&format!("{p_path}.p_active_w"), p.p_active_w)?;
            if p.p_idle_w > p.p_active_w {
                return Err(ModelError::NegativeParameter {
                    path: format!("{p_path}.p_idle_w"),
                    detail: format!("idle draw {} exceeds active draw {}", p.p_idle_w, p.p_active_w),
                });
            }
            require_probability(&format!("{p_path}.rho"), p.rho)?;
        }

        let mut emitters = Vec::new();
        for (j, e) in d.emitters.iter().enumerate() {
            let e_path = format!("{dev_path}.emitters[{j}]");
            let task_class = match e.task_class.as_deref() {
                None | Some("mixture") => {
                    uses_mixture = true;
                    None
                }
                Some(named) => {
                    let c = TaskClass::parse(named).ok_or_else(|| ModelError::UnknownTaskClass {
                        path: format!("{e_path}.task_class"),
                        found: named.to_string(),
                    })?;
                    if !task_classes.contains_key(&c) {
                        return Err(ModelError::Inconsistent {
                            path: format!("{e_path}.task_class"),
                            detail: format!("task class `{c}` has no entry in task_classes"),
                        });
                    }
                    Some(c)
                }
            };
            let arrival = match e.arrival {
                Some(ArrivalProcess::Poisson { rate_per_s }) => {
                    require_positive(&format!("{e_path}.arrival.poisson.rate_per_s"), rate_per_s)?;
                    ArrivalProcess::Poisson { rate_per_s }
                }
                Some(ArrivalProcess::Periodic { period_s }) => {
                    require_positive(&format!("{e_path}.arrival.periodic.period_s"), period_s)?;
                    ArrivalProcess::Periodic { period_s }
                }
                None => {
                    require_positive("arrival_rate_per_device", raw.arrival_rate_per_device)?;
                    ArrivalProcess::Poisson { rate_per_s: raw.arrival_rate_per_device }
                }
            };
            emitters.push(EmitterSpec { task_class, arrival });
        }

        let width = ((d.count.max(2) - 1) as f64).log10() as usize + 1;
        for k in 0..d.count {
            let id = if d.count == 1 { d.id.clone() } else { format!("{}-{:0width$}", d.id, k) };
            devices.push(DeviceSpec {
                id,
                class,
                processing_power: d.processing_power,
                owned_by_enterprise: d.owned_by_enterprise,
                mesh_member,
                gateway_role,
                servers,
                power_profile: d.power_profile.clone(),
                emitters: emitters.clone(),
            });
        }
    }

    // Unique ids after expansion.
    {
        let mut seen = std::collections::BTreeSet::new();
        for (i, d) in devices.iter().enumerate() {
            if !seen.insert(d.id.clone()) {
                return Err(ModelError::Inconsistent {
                    path: format!("devices[{i}].id"),
                    detail: format!("duplicate device id `{}` after expansion", d.id),
                });
            }
        }
    }

    // Mixture: required and normalized when any emitter draws from it,
    // otherwise derived from emitter rates so reports and predictors always
    // have class fractions to work with.
    let mut task_mixture = BTreeMap::new();
    for (key, &p) in &raw.task_mixture {
        let class = TaskClass::parse(key).ok_or_else(|| ModelError::UnknownTaskClass {
            path: format!("task_mixture.{key}"),
            found: key.clone(),
        })?;
        require_probability(&format!("task_mixture.{key}"), p)?;
        if !task_classes.contains_key(&class) {
            return Err(ModelError::Inconsistent {
                path: format!("task_mixture.{key}"),
                detail: format!("task class `{class}` has no entry in task_classes"),
            });
        }
        task_mixture.insert(class, p);
    }
    if uses_mixture {
        let sum: f64 = task_mixture.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::MixtureNotNormalized { path: "task_mixture".into(), sum });
        }
    } else if task_mixture.is_empty() {
        task_mixture =
            expected_class_fractions(&devices, raw.arrival_rate_per_device, &task_mixture, raw.duration_s);
    }

    // Links and architectures.
    let links = LinkTable {
        uplink: validate_link("links.uplink", LinkTier::Uplink, raw.links.uplink)?,
        local_network: validate_link("links.local_network", LinkTier::LocalNetwork, raw.links.local_network)?,
        local_mesh: validate_link("links.local_mesh", LinkTier::LocalMesh, raw.links.local_mesh)?,
    };
    let architecture_params = ArchitectureTable {
        cloud: validate_arch_params("architectures.cloud", Architecture::CloudCentric, raw.architectures.cloud)?,
        gateway: validate_arch_params("architectures.gateway", Architecture::GatewayEdge, raw.architectures.gateway)?,
        dfc: validate_arch_params("architectures.dfc", Architecture::DfcAi, raw.architectures.dfc)?,
    };

    // Pricing.
    let pricing = raw.pricing;
    require_non_negative("pricing.cloud_gpu_per_hour", pricing.cloud_gpu_per_hour)?;
    require_non_negative("pricing.edge_server_per_hour", pricing.edge_server_per_hour)?;
    require_non_negative("pricing.edge_maintenance_per_hour", pricing.edge_maintenance_per_hour)?;
    require_non_negative("pricing.device_compute_per_hour", pricing.device_compute_per_hour)?;
    require_non_negative("pricing.cloud_egress_per_gb", pricing.cloud_egress_per_gb)?;
    require_non_negative("pricing.edge_maintenance_hours_per_day", pricing.edge_maintenance_hours_per_day)?;
    require_non_negative("pricing.device_upkeep_per_day", pricing.device_upkeep_per_day)?;

    // Engine tuning.
    require_non_negative("engine.retry_backoff_ms", raw.engine.retry_backoff_ms)?;
    require_non_negative("engine.discovery_delay_s", raw.engine.discovery_delay_s)?;

    // Outage windows: within-range and non-overlapping.
    let mut windows = raw.outage_windows.clone();
    for (i, w) in windows.iter().enumerate() {
        let w_path = format!("outage_windows[{i}]");
        require_non_negative(&format!("{w_path}.start_s"), w.start_s)?;
        require_non_negative(&format!("{w_path}.end_s"), w.end_s)?;
        if w.end_s < w.start_s {
            return Err(ModelError::NegativeParameter {
                path: w_path,
                detail: format!("window ends ({}) before it starts ({})", w.end_s, w.start_s),
            });
        }
    }
    windows.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for i in 1..windows.len() {
        if windows[i].start_s < windows[i - 1].end_s {
            return Err(ModelError::OverlappingOutageWindows { path: format!("outage_windows[{i}]") });
        }
    }

    Ok(ScenarioConfig {
        name,
        duration_s: raw.duration_s,
        arrival_rate_per_device: raw.arrival_rate_per_device,
        devices,
        task_mixture,
        task_classes,
        links,
        architecture_params,
        pricing,
        engine: raw.engine,
        outage_windows: windows,
    })
}

/// Expected class fractions from emitter rates (periodic emitters contribute
/// `duration / period` arrivals, Poisson emitters `rate * duration`).
fn expected_class_fractions(
    devices: &[DeviceSpec],
    default_rate: f64,
    mixture: &BTreeMap<TaskClass, f64>,
    duration_s: f64,
) -> BTreeMap<TaskClass, f64> {
    let _ = default_rate;
    let mut counts: BTreeMap<TaskClass, f64> = BTreeMap::new();
    for d in devices {
        for e in &d.emitters {
            let expected = match e.arrival {
                ArrivalProcess::Poisson { rate_per_s } => rate_per_s * duration_s,
                ArrivalProcess::Periodic { period_s } => duration_s / period_s,
            };
            match e.task_class {
                Some(c) => *counts.entry(c).or_insert(0.0) += expected,
                None => {
                    for (&c, &p) in mixture {
                        *counts.entry(c).or_insert(0.0) += expected * p;
                    }
                }
            }
        }
    }
    let total: f64 = counts.values().sum();
    if total > 0.0 {
        for v in counts.values_mut() {
            *v /= total;
        }
    }
    counts
}
