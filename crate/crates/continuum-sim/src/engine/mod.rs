//! Discrete-event simulation core.
//!
//! The engine merges the lazy task stream with a priority queue of pending
//! service visits. A task's life is one or two queue visits (origin device,
//! mesh GPU, gateway, or cloud) joined by network legs; all task-level
//! randomness comes from a private generator seeded with the task's
//! `sim_seed`, so outcomes are independent of engine processing order and of
//! every other task.
//!
//! Events are ordered by `(time, sequence)`, which makes runs bit-for-bit
//! reproducible for a `(scenario, architecture, seed)` triple. Work admitted
//! before the horizon drains to completion past it.
//!
//! Randomness spent per task, in draw order: routing picks (gateway or GPU
//! peer when more than one candidate), the per-task uplink availability gate
//! inside unstable windows (drawn at most once, on first need), network leg
//! propagation and reliability draws in temporal order, the gateway's
//! cloud-fallback coin, the device-collaboration coin, and degraded-mode
//! precache lookups. Paths that take no branch consume no draws: a
//! device-local task under a zero collaboration share never touches its
//! generator, so its latency is exactly independent of link parameters.

pub mod queue;
pub mod registry;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    Architecture, ArchitectureParams, LinkTier, OutageWindow, ProcessedAt, ScenarioConfig, ScenarioName,
    TaskCategory, TaskClass,
};
use crate::network::{self, OutagePhase};
use crate::workload::{generate_stream, Task};

pub use queue::ServerQueue;
pub use registry::ClusterRegistry;

/// Latency accumulator for one task class (completed tasks only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStat {
    pub count: u64,
    pub sum_ms: f64,
    pub max_ms: f64,
}

/// A device whose long-run utilization crossed the stability threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueWarning {
    pub device_id: String,
    pub utilization: f64,
}

/// Everything one simulation run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub scenario: ScenarioName,
    pub architecture: Architecture,
    pub seed: u64,
    pub duration_s: f64,

    pub generated: u64,
    pub completed: u64,
    pub failed: u64,
    pub deferred: u64,
    /// Completed, but later than the class deadline.
    pub deadline_missed: u64,
    pub retries: u64,
    pub collab_exchanges: u64,
    pub alpha_forwards: u64,
    pub precache_hits: u64,

    pub latency_sum_ms: f64,
    pub class_latency: BTreeMap<TaskClass, ClassStat>,
    /// Final station of every task (failure and deferral included).
    pub location_counts: BTreeMap<ProcessedAt, u64>,
    /// Bytes moved toward the processing side, per tier (retries re-count).
    pub bytes_up: BTreeMap<LinkTier, u64>,
    /// Bytes moved back toward task origins, per tier.
    pub bytes_down: BTreeMap<LinkTier, u64>,

    /// Service seconds per device, aligned with `ScenarioConfig::devices`.
    pub device_busy_s: Vec<f64>,
    pub device_served: Vec<u64>,
    pub device_wait_ms: Vec<f64>,

    /// Non-deferrable arrivals inside outage windows, and how many of them
    /// completed within their deadlines.
    pub capability_arrived: u64,
    pub capability_completed: u64,

    pub queue_warnings: Vec<QueueWarning>,
}

impl RunMetrics {
    pub fn mean_latency_ms(&self) -> f64 {
        if self.completed == 0 {
            0.0
        } else {
            self.latency_sum_ms / self.completed as f64
        }
    }

    pub fn class_mean_ms(&self, class: TaskClass) -> Option<f64> {
        self.class_latency.get(&class).map(|s| s.sum_ms / s.count as f64)
    }

    /// Share of all generated tasks that ended at `loc`.
    pub fn location_fraction(&self, loc: ProcessedAt) -> f64 {
        if self.generated == 0 {
            return 0.0;
        }
        *self.location_counts.get(&loc).unwrap_or(&0) as f64 / self.generated as f64
    }

    /// Fraction of non-deferrable work arriving inside outage windows that
    /// still completed in time; `None` when no such work arrived.
    pub fn capability_fraction(&self) -> Option<f64> {
        (self.capability_arrived > 0).then(|| self.capability_completed as f64 / self.capability_arrived as f64)
    }

    /// Every generated task is accounted for exactly once.
    pub fn conservation_holds(&self) -> bool {
        let disposed = self.completed + self.failed + self.deferred;
        let located: u64 = self.location_counts.values().sum();
        self.generated == disposed && self.generated == located
    }
}

/// What happens after a visit's service completes.
#[derive(Debug, Clone, Copy)]
enum Tail {
    /// Cloud processing done: result (if any) returns over the uplink.
    CloudReturn,
    /// Gateway processing done: result over the local network, then possibly
    /// the cloud-fallback hop. Degraded (precache) service skips the fallback.
    GatewayServed { degraded: bool },
    /// Device-side processing done: mesh result leg if the work ran on a GPU
    /// peer, then possibly a collaboration exchange.
    DfcServed { at: ProcessedAt, result_mesh: bool },
}

/// Per-task lifecycle accounting, reported by `--trace`.
#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    /// Waiting time in server queues.
    queue_ms: f64,
    /// Service time across all visits.
    proc_ms: f64,
    /// Network time: serialization, propagation, retry backoff, acks.
    net_ms: f64,
    /// Marginal energy: transmission tariffs plus the serving devices'
    /// active-minus-idle power over this task's service time.
    energy_wh: f64,
}

struct Visit {
    t: f64,
    seq: u64,
    device: u32,
    work_ms: f64,
    tail: Tail,
    task: Task,
    rng: ChaCha8Rng,
    in_window: bool,
    gate: Option<bool>,
    acc: Acc,
}

impl PartialEq for Visit {
    fn eq(&self, other: &Self) -> bool {
        self.t == other.t && self.seq == other.seq
    }
}
impl Eq for Visit {}
impl PartialOrd for Visit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Visit {
    // Reversed so the max-heap pops the earliest (t, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy)]
struct ClassInfo {
    base_ms: f64,
    result_bytes: u64,
    deadline_ms: Option<f64>,
    deferrable: bool,
}

#[derive(Debug, Clone, Copy)]
enum Outcome {
    Completed { at: ProcessedAt, latency_ms: f64 },
    Failed,
    Deferred,
}

struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    arch: Architecture,
    params: &'a ArchitectureParams,
    windows: &'a [OutageWindow],
    heap: BinaryHeap<Visit>,
    queues: Vec<ServerQueue>,
    registry: ClusterRegistry,
    gateways: Vec<u32>,
    cloud: Option<u32>,
    class_info: [ClassInfo; 8],
    powers: Vec<f64>,
    /// Per device: active-minus-idle watts of its services under this
    /// architecture, for marginal per-task energy in traces.
    delta_w: Vec<f64>,
    seq: u64,

    generated: u64,
    completed: u64,
    failed: u64,
    deferred: u64,
    deadline_missed: u64,
    retries: u64,
    collab_exchanges: u64,
    alpha_forwards: u64,
    precache_hits: u64,
    latency_sum_ms: f64,
    class_stats: [ClassStat; 8],
    locations: [u64; 7],
    bytes: [[u64; 3]; 2],
    cap_arrived: u64,
    cap_completed: u64,

    trace: Option<&'a mut dyn Write>,
    trace_err: Option<io::Error>,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a ScenarioConfig, arch: Architecture, trace: Option<&'a mut dyn Write>) -> Self {
        let mut class_info = [ClassInfo { base_ms: f64::NAN, result_bytes: 0, deadline_ms: None, deferrable: false };
            8];
        for (&c, spec) in &cfg.task_classes {
            class_info[c as usize] = ClassInfo {
                base_ms: spec.base_proc_ms,
                result_bytes: spec.result_bytes,
                deadline_ms: spec.deadline_ms,
                deferrable: spec.deferrable,
            };
        }
        Engine {
            cfg,
            arch,
            params: cfg.architecture_params.get(arch),
            windows: &cfg.outage_windows,
            heap: BinaryHeap::new(),
            queues: cfg.devices.iter().map(|d| ServerQueue::new(d.servers)).collect(),
            registry: ClusterRegistry::new(cfg),
            gateways: cfg.gateway_devices().map(|(i, _)| i as u32).collect(),
            cloud: cfg.cloud_device().map(|(i, _)| i as u32),
            class_info,
            powers: cfg.devices.iter().map(|d| d.processing_power).collect(),
            delta_w: cfg
                .devices
                .iter()
                .map(|d| {
                    d.power_profile
                        .iter()
                        .filter(|p| p.active_in.contains(&arch))
                        .map(|p| p.p_active_w - p.p_idle_w)
                        .sum()
                })
                .collect(),
            seq: 0,
            generated: 0,
            completed: 0,
            failed: 0,
            deferred: 0,
            deadline_missed: 0,
            retries: 0,
            collab_exchanges: 0,
            alpha_forwards: 0,
            precache_hits: 0,
            latency_sum_ms: 0.0,
            class_stats: [ClassStat { count: 0, sum_ms: 0.0, max_ms: 0.0 }; 8],
            locations: [0; 7],
            bytes: [[0; 3]; 2],
            cap_arrived: 0,
            cap_completed: 0,
            trace,
            trace_err: None,
        }
    }

    fn phase(&self, t: f64) -> OutagePhase {
        network::phase_at(self.windows, t)
    }

    fn in_window(&self, t: f64) -> bool {
        self.windows.iter().any(|w| t >= w.start_s && t < w.end_s)
    }

    /// Uplink usability for this task: always in normal phase, never while
    /// down, and decided by one cached draw inside an unstable window.
    fn resolve_gate(&self, phase: OutagePhase, rng: &mut ChaCha8Rng, cache: &mut Option<bool>) -> bool {
        match phase {
            OutagePhase::Normal => true,
            OutagePhase::Down => false,
            OutagePhase::Unstable => {
                *cache.get_or_insert_with(|| network::unstable_uplink_available(&self.cfg.links.uplink, rng))
            }
        }
    }

    /// One network traversal with byte and retry accounting; `up` means
    /// toward the processing side.
    fn leg(
        &mut self,
        tier: LinkTier,
        bytes: u64,
        up: bool,
        phase: OutagePhase,
        rng: &mut ChaCha8Rng,
        acc: &mut Acc,
    ) -> Result<f64, network::NetworkError> {
        let link = self.cfg.links.get(tier);
        let tr = network::traverse(link, bytes, phase, &self.cfg.engine, rng)?;
        let moved = bytes * tr.attempts as u64;
        self.bytes[if up { 0 } else { 1 }][tier as usize] += moved;
        if tr.attempts > 1 {
            self.retries += 1;
        }
        acc.net_ms += tr.latency_ms;
        acc.energy_wh += network::transmission_energy_wh(link, moved);
        Ok(tr.latency_ms)
    }

    fn work_ms(&self, class: TaskClass, device: u32) -> f64 {
        self.class_info[class as usize].base_ms / self.powers[device as usize]
    }

    #[allow(clippy::too_many_arguments)]
    fn push_visit(
        &mut self,
        t: f64,
        device: u32,
        work_ms: f64,
        tail: Tail,
        task: Task,
        rng: ChaCha8Rng,
        in_window: bool,
        gate: Option<bool>,
        acc: Acc,
    ) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Visit { t, seq, device, work_ms, tail, task, rng, in_window, gate, acc });
    }

    fn dispose(&mut self, task: &Task, outcome: Outcome, in_window: bool, acc: Acc) {
        let info = self.class_info[task.class as usize];
        let (label, at, latency) = match outcome {
            Outcome::Completed { at, latency_ms } => {
                self.completed += 1;
                self.locations[at as usize] += 1;
                self.latency_sum_ms += latency_ms;
                let s = &mut self.class_stats[task.class as usize];
                s.count += 1;
                s.sum_ms += latency_ms;
                s.max_ms = s.max_ms.max(latency_ms);
                let in_time = info.deadline_ms.is_none_or(|d| latency_ms <= d);
                if !in_time {
                    self.deadline_missed += 1;
                }
                if in_window && !info.deferrable && in_time {
                    self.cap_completed += 1;
                }
                ("completed", Some(at), Some(latency_ms))
            }
            Outcome::Failed => {
                self.failed += 1;
                self.locations[ProcessedAt::Failed as usize] += 1;
                ("failed", None, None)
            }
            Outcome::Deferred => {
                self.deferred += 1;
                self.locations[ProcessedAt::Deferred as usize] += 1;
                ("deferred", None, None)
            }
        };
        if let Some(sink) = self.trace.as_deref_mut() {
            let row = writeln!(
                sink,
                "{},{},{},{:.4},{:.4},{:.4},{},{:.9e},{}",
                task.id,
                task.class,
                at.map_or("-", |a| a.key()),
                acc.queue_ms,
                acc.proc_ms,
                acc.net_ms,
                latency.map_or(String::new(), |l| format!("{l:.4}")),
                acc.energy_wh,
                label,
            );
            if let Err(e) = row {
                self.trace_err.get_or_insert(e);
                self.trace = None;
            }
        }
    }

    /// The uplink (or a required peer) cannot serve this task: deferrable
    /// work waits out the outage, the rest fails.
    fn dispose_unreachable(&mut self, task: &Task, in_window: bool, acc: Acc) {
        if self.class_info[task.class as usize].deferrable {
            self.dispose(task, Outcome::Deferred, in_window, acc);
        } else {
            self.dispose(task, Outcome::Failed, in_window, acc);
        }
    }

    /// Ship the payload to the cloud and queue it there (shared by the
    /// cloud-centric path and cloud-bound classes elsewhere).
    #[allow(clippy::too_many_arguments)]
    fn route_to_cloud(
        &mut self,
        task: Task,
        mut rng: ChaCha8Rng,
        t: f64,
        phase: OutagePhase,
        in_window: bool,
        mut gate: Option<bool>,
        mut acc: Acc,
    ) {
        let Some(cloud) = self.cloud else {
            return self.dispose_unreachable(&task, in_window, acc);
        };
        if !self.resolve_gate(phase, &mut rng, &mut gate) {
            return self.dispose_unreachable(&task, in_window, acc);
        }
        match self.leg(LinkTier::Uplink, task.payload_bytes, true, phase, &mut rng, &mut acc) {
            Ok(lat) => {
                let work = self.work_ms(task.class, cloud);
                self.push_visit(
                    t + lat / 1e3,
                    cloud,
                    work,
                    Tail::CloudReturn,
                    task,
                    rng,
                    in_window,
                    gate,
                    acc,
                );
            }
            Err(_) => self.dispose_unreachable(&task, in_window, acc),
        }
    }

    fn admit(&mut self, task: Task) {
        self.generated += 1;
        let rng = ChaCha8Rng::seed_from_u64(task.sim_seed);
        let t0 = task.created_at;
        let phase = self.phase(t0);
        let in_window = self.in_window(t0);
        if in_window && !self.class_info[task.class as usize].deferrable {
            self.cap_arrived += 1;
        }
        match self.arch {
            Architecture::CloudCentric => {
                self.route_to_cloud(task, rng, t0, phase, in_window, None, Acc::default())
            }
            Architecture::GatewayEdge => self.admit_gateway(task, rng, t0, phase, in_window),
            Architecture::DfcAi => self.admit_dfc(task, rng, t0, phase, in_window),
        }
    }

    fn admit_gateway(&mut self, task: Task, mut rng: ChaCha8Rng, t0: f64, phase: OutagePhase, in_window: bool) {
        let mut acc = Acc::default();
        let gw = match self.gateways.len() {
            0 => return self.dispose_unreachable(&task, in_window, acc),
            1 => self.gateways[0],
            n => self.gateways[rng.random_range(0..n)],
        };
        let mut gate = None;
        if self.resolve_gate(phase, &mut rng, &mut gate) {
            // Backhaul reachable: the gateway serves everything, and the
            // cloud-fallback share is decided after its service completes.
            match self.leg(LinkTier::LocalNetwork, task.payload_bytes, true, phase, &mut rng, &mut acc) {
                Ok(lat) => {
                    let work = self.work_ms(task.class, gw);
                    self.push_visit(
                        t0 + lat / 1e3,
                        gw,
                        work,
                        Tail::GatewayServed { degraded: false },
                        task,
                        rng,
                        in_window,
                        gate,
                        acc,
                    );
                }
                Err(_) => self.dispose_unreachable(&task, in_window, acc),
            }
            return;
        }
        // Backhaul unreachable: only pre-cached models can serve, and only
        // for work that is not cloud-bound by definition.
        match task.class.category() {
            TaskCategory::CloudBound | TaskCategory::CriticalCloud => {
                self.dispose_unreachable(&task, in_window, acc)
            }
            TaskCategory::Local | TaskCategory::GpuBound => {
                if rng.random::<f64>() < self.params.precache_hit_probability {
                    self.precache_hits += 1;
                    // The cached fallback model is smaller and slower on
                    // accelerator-hungry work.
                    let factor = if task.class.category() == TaskCategory::GpuBound { 2.0 } else { 1.0 };
                    match self.leg(
                        LinkTier::LocalNetwork,
                        task.payload_bytes,
                        true,
                        phase,
                        &mut rng,
                        &mut acc,
                    ) {
                        Ok(lat) => {
                            let work = self.work_ms(task.class, gw) * factor;
                            self.push_visit(
                                t0 + lat / 1e3,
                                gw,
                                work,
                                Tail::GatewayServed { degraded: true },
                                task,
                                rng,
                                in_window,
                                gate,
                                acc,
                            );
                        }
                        Err(_) => self.dispose_unreachable(&task, in_window, acc),
                    }
                } else {
                    self.dispose_unreachable(&task, in_window, acc);
                }
            }
        }
    }

    fn admit_dfc(&mut self, task: Task, mut rng: ChaCha8Rng, t0: f64, phase: OutagePhase, in_window: bool) {
        let mut acc = Acc::default();
        match task.class.category() {
            TaskCategory::Local => {
                let work = self.work_ms(task.class, task.origin);
                self.push_visit(
                    t0,
                    task.origin,
                    work,
                    Tail::DfcServed { at: ProcessedAt::OriginDevice, result_mesh: false },
                    task,
                    rng,
                    in_window,
                    None,
                    acc,
                );
            }
            TaskCategory::GpuBound => {
                let origin_is_gpu = self.cfg.devices[task.origin as usize].is_mesh_gpu();
                let candidates = self.registry.discover_resources(t0);
                if origin_is_gpu || candidates.is_empty() {
                    // Run at the origin's own pace rather than stall.
                    let work = self.work_ms(task.class, task.origin);
                    self.push_visit(
                        t0,
                        task.origin,
                        work,
                        Tail::DfcServed { at: ProcessedAt::OriginDevice, result_mesh: false },
                        task,
                        rng,
                        in_window,
                        None,
                        acc,
                    );
                    return;
                }
                let gpu = if candidates.len() == 1 {
                    candidates[0]
                } else {
                    candidates[rng.random_range(0..candidates.len())]
                };
                match self.leg(LinkTier::LocalMesh, task.payload_bytes, true, phase, &mut rng, &mut acc) {
                    Ok(lat) => {
                        let work = self.work_ms(task.class, gpu);
                        self.push_visit(
                            t0 + lat / 1e3,
                            gpu,
                            work,
                            Tail::DfcServed { at: ProcessedAt::ClusterGpu, result_mesh: true },
                            task,
                            rng,
                            in_window,
                            None,
                            acc,
                        );
                    }
                    Err(_) => {
                        // Mesh hiccup: fall back to local processing.
                        let work = self.work_ms(task.class, task.origin);
                        self.push_visit(
                            t0,
                            task.origin,
                            work,
                            Tail::DfcServed { at: ProcessedAt::OriginDevice, result_mesh: false },
                            task,
                            rng,
                            in_window,
                            None,
                            acc,
                        );
                    }
                }
            }
            TaskCategory::CloudBound | TaskCategory::CriticalCloud => {
                self.route_to_cloud(task, rng, t0, phase, in_window, None, acc);
            }
        }
    }

    fn process(&mut self, mut v: Visit) {
        let (start, end) = self.queues[v.device as usize].serve(v.t, v.work_ms / 1e3);
        let mut acc = v.acc;
        acc.queue_ms += (start - v.t) * 1e3;
        acc.proc_ms += v.work_ms;
        acc.energy_wh += v.work_ms / 1e3 * self.delta_w[v.device as usize] / 3_600.0;
        let info = self.class_info[v.task.class as usize];
        let phase = self.phase(end);
        match v.tail {
            Tail::CloudReturn => {
                if info.result_bytes > 0 {
                    match self.leg(LinkTier::Uplink, info.result_bytes, false, phase, &mut v.rng, &mut acc)
                    {
                        Ok(lat) => {
                            let t = end + lat / 1e3;
                            self.dispose(
                                &v.task,
                                Outcome::Completed {
                                    at: ProcessedAt::Cloud,
                                    latency_ms: (t - v.task.created_at) * 1e3,
                                },
                                v.in_window,
                                acc,
                            );
                        }
                        Err(_) => self.dispose_unreachable(&v.task, v.in_window, acc),
                    }
                } else {
                    self.dispose(
                        &v.task,
                        Outcome::Completed {
                            at: ProcessedAt::Cloud,
                            latency_ms: (end - v.task.created_at) * 1e3,
                        },
                        v.in_window,
                        acc,
                    );
                }
            }
            Tail::GatewayServed { degraded } => {
                let mut t = end;
                if info.result_bytes > 0 {
                    match self.leg(
                        LinkTier::LocalNetwork,
                        info.result_bytes,
                        false,
                        phase,
                        &mut v.rng,
                        &mut acc,
                    ) {
                        Ok(lat) => t += lat / 1e3,
                        Err(_) => return self.dispose_unreachable(&v.task, v.in_window, acc),
                    }
                }
                let fallback =
                    !degraded && self.params.alpha > 0.0 && v.rng.random::<f64>() < self.params.alpha;
                if fallback {
                    self.alpha_forwards += 1;
                    let phase2 = self.phase(t);
                    let task = v.task;
                    let mut rng = v.rng;
                    let mut gate = v.gate;
                    if !self.resolve_gate(phase2, &mut rng, &mut gate) {
                        return self.dispose_unreachable(&task, v.in_window, acc);
                    }
                    let Some(cloud) = self.cloud else {
                        return self.dispose_unreachable(&task, v.in_window, acc);
                    };
                    match self.leg(LinkTier::Uplink, task.payload_bytes, true, phase2, &mut rng, &mut acc) {
                        Ok(lat) => {
                            let work = self.work_ms(task.class, cloud);
                            self.push_visit(
                                t + lat / 1e3,
                                cloud,
                                work,
                                Tail::CloudReturn,
                                task,
                                rng,
                                v.in_window,
                                gate,
                                acc,
                            );
                        }
                        Err(_) => self.dispose_unreachable(&task, v.in_window, acc),
                    }
                } else {
                    self.dispose(
                        &v.task,
                        Outcome::Completed {
                            at: ProcessedAt::Gateway,
                            latency_ms: (t - v.task.created_at) * 1e3,
                        },
                        v.in_window,
                        acc,
                    );
                }
            }
            Tail::DfcServed { at, result_mesh } => {
                let mut t = end;
                if result_mesh && info.result_bytes > 0 {
                    match self.leg(LinkTier::LocalMesh, info.result_bytes, false, phase, &mut v.rng, &mut acc)
                    {
                        Ok(lat) => t += lat / 1e3,
                        Err(_) => return self.dispose_unreachable(&v.task, v.in_window, acc),
                    }
                }
                if self.params.beta > 0.0 && v.rng.random::<f64>() < self.params.beta {
                    // Best-effort peer/cloud sync: ship a digest up, wait for
                    // the acknowledgement; skipped when the backhaul is out.
                    let phase2 = self.phase(t);
                    let mut gate = v.gate;
                    if self.resolve_gate(phase2, &mut v.rng, &mut gate) {
                        if let Ok(up) = self.leg(
                            LinkTier::Uplink,
                            self.params.collab_payload_bytes,
                            true,
                            phase2,
                            &mut v.rng,
                            &mut acc,
                        ) {
                            let ack = network::propagation_ms(&self.cfg.links.uplink, &mut v.rng);
                            t += (up + ack) / 1e3;
                            acc.net_ms += ack;
                            self.collab_exchanges += 1;
                        }
                    }
                }
                self.dispose(
                    &v.task,
                    Outcome::Completed { at, latency_ms: (t - v.task.created_at) * 1e3 },
                    v.in_window,
                    acc,
                );
            }
        }
    }

    fn into_metrics(self, seed: u64) -> RunMetrics {
        let mut class_latency = BTreeMap::new();
        for (i, &c) in TaskClass::ALL.iter().enumerate() {
            if self.class_stats[i].count > 0 {
                class_latency.insert(c, self.class_stats[i]);
            }
        }
        let mut location_counts = BTreeMap::new();
        for (i, &loc) in ProcessedAt::ALL.iter().enumerate() {
            if self.locations[i] > 0 {
                location_counts.insert(loc, self.locations[i]);
            }
        }
        let mut bytes_up = BTreeMap::new();
        let mut bytes_down = BTreeMap::new();
        for (i, &tier) in LinkTier::ALL.iter().enumerate() {
            if self.bytes[0][i] > 0 {
                bytes_up.insert(tier, self.bytes[0][i]);
            }
            if self.bytes[1][i] > 0 {
                bytes_down.insert(tier, self.bytes[1][i]);
            }
        }
        let mut queue_warnings = Vec::new();
        for (i, q) in self.queues.iter().enumerate() {
            let utilization = q.busy_s / (self.cfg.duration_s * q.servers() as f64);
            if utilization > 0.95 {
                queue_warnings.push(QueueWarning { device_id: self.cfg.devices[i].id.clone(), utilization });
            }
        }
        RunMetrics {
            scenario: self.cfg.name,
            architecture: self.arch,
            seed,
            duration_s: self.cfg.duration_s,
            generated: self.generated,
            completed: self.completed,
            failed: self.failed,
            deferred: self.deferred,
            deadline_missed: self.deadline_missed,
            retries: self.retries,
            collab_exchanges: self.collab_exchanges,
            alpha_forwards: self.alpha_forwards,
            precache_hits: self.precache_hits,
            latency_sum_ms: self.latency_sum_ms,
            class_latency,
            location_counts,
            bytes_up,
            bytes_down,
            device_busy_s: self.queues.iter().map(|q| q.busy_s).collect(),
            device_served: self.queues.iter().map(|q| q.served).collect(),
            device_wait_ms: self.queues.iter().map(|q| q.wait_ms).collect(),
            capability_arrived: self.cap_arrived,
            capability_completed: self.cap_completed,
            queue_warnings,
        }
    }
}

fn run_inner<'a>(
    cfg: &'a ScenarioConfig,
    arch: Architecture,
    seed: u64,
    trace: Option<&'a mut dyn Write>,
) -> io::Result<RunMetrics> {
    let mut engine = Engine::new(cfg, arch, trace);
    if let Some(sink) = engine.trace.as_deref_mut() {
        writeln!(sink, "task_id,class,route,queue_ms,proc_ms,net_ms,total_ms,energy_wh,outcome")?;
    }
    let mut stream = generate_stream(cfg, seed).peekable();
    loop {
        let event_due = match (engine.heap.peek(), stream.peek()) {
            (None, None) => break,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            // Ties admit the newborn task first; it gets the later sequence
            // number, so queue order is unaffected.
            (Some(v), Some(task)) => v.t < task.created_at,
        };
        if event_due {
            let v = engine.heap.pop().expect("event peeked");
            engine.process(v);
        } else {
            let task = stream.next().expect("task peeked");
            engine.admit(task);
        }
    }
    if let Some(e) = engine.trace_err.take() {
        return Err(e);
    }
    Ok(engine.into_metrics(seed))
}

/// Runs one `(scenario, architecture, seed)` simulation to completion.
pub fn run_simulation(cfg: &ScenarioConfig, arch: Architecture, seed: u64) -> RunMetrics {
    run_inner(cfg, arch, seed, None).expect("tracing disabled, no I/O to fail")
}

/// As [`run_simulation`], also writing one CSV row per task to `sink`.
pub fn run_simulation_traced(
    cfg: &ScenarioConfig,
    arch: Architecture,
    seed: u64,
    sink: &mut dyn Write,
) -> io::Result<RunMetrics> {
    run_inner(cfg, arch, seed, Some(sink))
}
