//! Task generation: turns a scenario's emitters into one lazy, time-ordered
//! stream of tasks.
//!
//! Reproducibility rests on two properties:
//!
//! * **Per-emitter child streams.** Every (device, emitter) pair gets its own
//!   ChaCha8 generator, seeded from the master seed, the device id, and the
//!   emitter index. Draws for one device never advance another device's
//!   stream, so adding a device to a scenario leaves every existing stream —
//!   arrival times, classes, payloads — bit-identical.
//! * **Per-task seeds.** Each task carries a `sim_seed` drawn from its
//!   emitter stream. All randomness the engine spends on the task (propagation
//!   delays, reliability draws, routing choices) comes from a generator seeded
//!   with it, so simulation draws for one task are independent of every other
//!   task and of the engine's processing order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::{self, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{ArrivalProcess, PayloadSpec, ScenarioConfig, TaskClass};

/// One unit of work emitted by a device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    /// Sequential in emission order (ties broken by device order).
    pub id: u64,
    /// Index into `ScenarioConfig::devices`.
    pub origin: u32,
    pub class: TaskClass,
    pub payload_bytes: u64,
    pub created_at: f64,
    /// Seeds the task's private simulation-randomness stream.
    pub sim_seed: u64,
}

/// FNV-1a on the device id gives a stable, order-independent stream identity.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// SplitMix64 finalizer; decorrelates structured seed material.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed of the child stream for one emitter on one device.
pub fn emitter_stream_seed(master_seed: u64, device_id: &str, emitter_index: usize) -> u64 {
    let ident = fnv1a64(device_id.as_bytes()) ^ splitmix64(emitter_index as u64 + 1);
    splitmix64(master_seed ^ splitmix64(ident))
}

/// Inverse-CDF exponential draw: the gap to the next Poisson arrival.
pub fn sample_interarrival<R: Rng + ?Sized>(rng: &mut R, rate_per_s: f64) -> f64 {
    debug_assert!(rate_per_s > 0.0);
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate_per_s
}

/// Non-empty cumulative class distribution, in map order.
fn mixture_cdf(cfg: &ScenarioConfig) -> Vec<(TaskClass, f64)> {
    let mut acc = 0.0;
    cfg.task_mixture
        .iter()
        .map(|(&c, &p)| {
            acc += p;
            (c, acc)
        })
        .collect()
}

struct EmitterState {
    origin: u32,
    rng: ChaCha8Rng,
    arrival: ArrivalProcess,
    fixed_class: Option<TaskClass>,
    next_t: f64,
}

/// Time ordering for the merge heap; arrival times are always finite.
#[derive(PartialEq)]
struct Ot(f64);
impl Eq for Ot {}
impl PartialOrd for Ot {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ot {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Lazy merged stream over all emitters, ordered by creation time.
pub struct TaskStream {
    emitters: Vec<EmitterState>,
    heap: BinaryHeap<Reverse<(Ot, usize)>>,
    cdf: Vec<(TaskClass, f64)>,
    payloads: std::collections::BTreeMap<TaskClass, PayloadSpec>,
    horizon_s: f64,
    next_id: u64,
}

/// Builds the task stream for one (scenario, seed) pair.
pub fn generate_stream(cfg: &ScenarioConfig, seed: u64) -> TaskStream {
    let mut emitters = Vec::new();
    let mut heap = BinaryHeap::new();
    for (di, dev) in cfg.devices.iter().enumerate() {
        for (ei, em) in dev.emitters.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(emitter_stream_seed(seed, &dev.id, ei));
            let next_t = match em.arrival {
                ArrivalProcess::Poisson { rate_per_s } => sample_interarrival(&mut rng, rate_per_s),
                // Periodic emitters are phase-randomized so a fleet of equal
                // periods does not fire in lockstep.
                ArrivalProcess::Periodic { period_s } => rng.random::<f64>() * period_s,
            };
            let idx = emitters.len();
            emitters.push(EmitterState {
                origin: di as u32,
                rng,
                arrival: em.arrival,
                fixed_class: em.task_class,
                next_t,
            });
            heap.push(Reverse((Ot(next_t), idx)));
        }
    }
    TaskStream {
        emitters,
        heap,
        cdf: mixture_cdf(cfg),
        payloads: cfg.task_classes.iter().map(|(&c, s)| (c, s.payload_bytes)).collect(),
        horizon_s: cfg.duration_s,
        next_id: 0,
    }
}

impl Iterator for TaskStream {
    type Item = Task;

    fn next(&mut self) -> Option<Task> {
        loop {
            let Reverse((Ot(t), idx)) = self.heap.pop()?;
            if t >= self.horizon_s {
                // All other emitters are at least this far along; drain.
                self.heap.clear();
                return None;
            }
            let em = &mut self.emitters[idx];
            debug_assert_eq!(t, em.next_t);

            // Draw order per task is fixed: class, payload, sim_seed, then the
            // gap to the emitter's next arrival.
            let class = match em.fixed_class {
                Some(c) => c,
                None => {
                    let u: f64 = em.rng.random();
                    self.cdf
                        .iter()
                        .find(|(_, cum)| u < *cum)
                        .map(|&(c, _)| c)
                        .unwrap_or_else(|| self.cdf.last().expect("mixture is non-empty").0)
                }
            };
            let payload_bytes = match self.payloads[&class] {
                PayloadSpec::Const(b) => b,
                PayloadSpec::Uniform { min_bytes, max_bytes } => {
                    em.rng.random_range(min_bytes..=max_bytes)
                }
            };
            let sim_seed = em.rng.next_u64();

            em.next_t = match em.arrival {
                ArrivalProcess::Poisson { rate_per_s } => t + sample_interarrival(&mut em.rng, rate_per_s),
                ArrivalProcess::Periodic { period_s } => t + period_s,
            };
            self.heap.push(Reverse((Ot(em.next_t), idx)));

            let id = self.next_id;
            self.next_id += 1;
            return Some(Task { id, origin: em.origin, class, payload_bytes, created_at: t, sim_seed });
        }
    }
}

/// Writes the generated workload as CSV (for inspection and plotting);
/// returns the number of rows written.
pub fn write_workload_csv<W: Write>(
    cfg: &ScenarioConfig,
    seed: u64,
    limit: Option<u64>,
    out: &mut W,
) -> io::Result<u64> {
    writeln!(out, "task_id,created_at_s,device_id,task_class,payload_bytes,sim_seed")?;
    let mut written = 0u64;
    for task in generate_stream(cfg, seed) {
        if limit.is_some_and(|l| written >= l) {
            break;
        }
        writeln!(
            out,
            "{},{:.6},{},{},{},{}",
            task.id,
            task.created_at,
            cfg.devices[task.origin as usize].id,
            task.class,
            task.payload_bytes,
            task.sim_seed
        )?;
        written += 1;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PRESET_NAMES, ScenarioConfig};
    use std::collections::BTreeMap;

    fn with_duration(name: &str, duration_s: f64) -> ScenarioConfig {
        let mut raw: serde_json::Value =
            serde_json::from_str(crate::model::preset_json(name).unwrap()).unwrap();
        raw["duration_s"] = serde_json::json!(duration_s);
        ScenarioConfig::from_json_str(&raw.to_string()).unwrap()
    }

    #[test]
    fn identical_seed_replays_identical_stream() {
        let cfg = with_duration("drone_fleet", 20_000.0);
        let a: Vec<Task> = generate_stream(&cfg, 42).collect();
        let b: Vec<Task> = generate_stream(&cfg, 42).collect();
        assert_eq!(a, b);
        let c: Vec<Task> = generate_stream(&cfg, 43).take(100).collect();
        assert_ne!(&a[..100], &c[..]);
    }

    #[test]
    fn stream_is_time_ordered_with_sequential_ids() {
        let cfg = with_duration("sensor_network", 600.0);
        let mut last_t = 0.0;
        for (i, task) in generate_stream(&cfg, 1).enumerate() {
            assert_eq!(task.id, i as u64);
            assert!(task.created_at >= last_t, "stream went backwards");
            assert!(task.created_at < cfg.duration_s);
            last_t = task.created_at;
        }
    }

    #[test]
    fn adding_a_device_leaves_existing_streams_unchanged() {
        // Per-device draw sequences must not depend on fleet composition.
        let per_device = |cfg: &ScenarioConfig| -> BTreeMap<String, Vec<(f64, TaskClass, u64, u64)>> {
            let mut out: BTreeMap<String, Vec<_>> = BTreeMap::new();
            for t in generate_stream(cfg, 7) {
                out.entry(cfg.devices[t.origin as usize].id.clone()).or_default().push((
                    t.created_at,
                    t.class,
                    t.payload_bytes,
                    t.sim_seed,
                ));
            }
            out
        };
        let base = with_duration("drone_fleet", 5_000.0);
        let mut raw: serde_json::Value =
            serde_json::from_str(crate::model::preset_json("drone_fleet").unwrap()).unwrap();
        raw["duration_s"] = serde_json::json!(5_000.0);
        let extra = serde_json::json!({
            "id": "drone-late-arrival",
            "class": "CpuDevice",
            "processing_power": 1.0,
            "power_profile": [],
            "emitters": [{"task_class": "mixture"}]
        });
        raw["devices"].as_array_mut().unwrap().push(extra);
        let grown = ScenarioConfig::from_json_str(&raw.to_string()).unwrap();

        let before = per_device(&base);
        let mut after = per_device(&grown);
        assert!(after.remove("drone-late-arrival").is_some_and(|v| !v.is_empty()));
        assert_eq!(before, after);
    }

    #[test]
    fn exponential_sampler_matches_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5a5a);
        let n = 1_000_000;
        let rate = 2.0;
        let mean = (0..n).map(|_| sample_interarrival(&mut rng, rate)).sum::<f64>() / n as f64;
        // True mean 1/rate = 0.5, standard error 0.0005.
        assert!((mean - 0.5).abs() < 0.003, "mean {mean}");
    }

    #[test]
    fn poisson_task_count_matches_expected_volume() {
        // Ten drones at 0.1 tasks/s for a day: 86_400 expected arrivals.
        let cfg = ScenarioConfig::preset("drone_fleet").unwrap();
        let n = generate_stream(&cfg, 11).count() as f64;
        assert!((n - 86_400.0).abs() < 4.0 * 86_400f64.sqrt(), "got {n} tasks");
    }

    #[test]
    fn mixture_fractions_converge_to_configuration() {
        let cfg = ScenarioConfig::preset("drone_fleet").unwrap();
        let mut counts: BTreeMap<TaskClass, f64> = BTreeMap::new();
        let mut total = 0.0;
        for t in generate_stream(&cfg, 3) {
            *counts.entry(t.class).or_insert(0.0) += 1.0;
            total += 1.0;
        }
        for (&class, &share) in &cfg.task_mixture {
            let got = counts[&class] / total;
            assert!((got - share).abs() < 0.01, "{class}: {got} vs {share}");
        }
    }

    #[test]
    fn periodic_emitters_fire_at_constant_gaps() {
        let cfg = with_duration("worker_safety", 3_600.0);
        let mut vitals: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for t in generate_stream(&cfg, 9) {
            if t.class == TaskClass::VitalSign {
                vitals.entry(t.origin).or_default().push(t.created_at);
            }
        }
        assert_eq!(vitals.len(), 25, "one vital-sign stream per wearable");
        for times in vitals.values() {
            assert!((times.len() as i64 - 3600).unsigned_abs() <= 1);
            assert!(times[0] < 1.0, "phase offset lies inside the first period");
            for w in times.windows(2) {
                assert!((w[1] - w[0] - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn per_task_seeds_do_not_collide() {
        let cfg = with_duration("sensor_network", 2_000.0);
        let mut seen = std::collections::BTreeSet::new();
        let mut n = 0u64;
        for t in generate_stream(&cfg, 5) {
            assert!(seen.insert(t.sim_seed), "duplicate sim_seed at task {}", t.id);
            n += 1;
        }
        assert!(n > 90_000, "expected ~100k tasks, got {n}");
    }

    #[test]
    fn all_presets_emit_only_configured_classes() {
        for name in PRESET_NAMES {
            let cfg = with_duration(name, 1_000.0);
            for t in generate_stream(&cfg, 2) {
                assert!(cfg.task_classes.contains_key(&t.class));
                assert!(t.payload_bytes > 0);
            }
        }
    }

    #[test]
    fn workload_csv_has_header_and_honours_limit() {
        let cfg = ScenarioConfig::preset("drone_fleet").unwrap();
        let mut buf = Vec::new();
        let rows = write_workload_csv(&cfg, 1, Some(50), &mut buf).unwrap();
        assert_eq!(rows, 50);
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "task_id,created_at_s,device_id,task_class,payload_bytes,sim_seed"
        );
        assert_eq!(lines.count(), 50);
    }
}
