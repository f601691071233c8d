//! Network behaviour: transfer timing, transmission energy, and link
//! availability under normal and degraded backhaul conditions.
//!
//! A transfer's latency has two parts: serialization (payload over bandwidth,
//! deterministic) and propagation (one uniform draw between the link's one-way
//! latency bounds). Keeping the split explicit lets the analytic predictors in
//! [`crate::metrics`] reuse the closed-form expectations.
//!
//! Degraded backhaul comes in two flavours, scheduled as windows on the
//! scenario clock: `Down` makes the uplink unusable outright, while `Unstable`
//! makes it available per task with the uplink's `unstable_availability`
//! probability. That per-task gate is drawn once by the engine; traversals
//! inside an unstable window therefore skip their own reliability draws, and
//! the single-retry courtesy of normal operation is suspended.

use rand::Rng;
use thiserror::Error;

use crate::model::{EngineTuning, LinkSpec, LinkTier, OutageMode, OutageWindow};

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("{tier:?} link unavailable")]
    LinkUnavailable { tier: LinkTier },
}

/// Backhaul condition at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutagePhase {
    Normal,
    Unstable,
    Down,
}

/// Resolves the outage phase at time `t_s` from validated (sorted,
/// non-overlapping) windows; each window covers `[start_s, end_s)`.
pub fn phase_at(windows: &[OutageWindow], t_s: f64) -> OutagePhase {
    for w in windows {
        if t_s < w.start_s {
            break;
        }
        if t_s < w.end_s {
            return match w.mode {
                OutageMode::Down => OutagePhase::Down,
                OutageMode::Unstable => OutagePhase::Unstable,
            };
        }
    }
    OutagePhase::Normal
}

/// Payload serialization time: bytes over link bandwidth.
pub fn serialization_ms(link: &LinkSpec, bytes: u64) -> f64 {
    (bytes as f64 * 8.0) / (link.bandwidth_mbps * 1e6) * 1e3
}

/// One-way propagation delay draw.
pub fn propagation_ms<R: Rng + ?Sized>(link: &LinkSpec, rng: &mut R) -> f64 {
    if link.latency_max_ms > link.latency_min_ms {
        rng.random_range(link.latency_min_ms..link.latency_max_ms)
    } else {
        link.latency_min_ms
    }
}

/// Expected one-way propagation delay (used by the analytic predictors).
pub fn mean_propagation_ms(link: &LinkSpec) -> f64 {
    0.5 * (link.latency_min_ms + link.latency_max_ms)
}

/// Transmission energy for moving `bytes` across the link, in Wh. The tariff
/// is per decimal gigabyte and covers both endpoints and the infrastructure
/// between them.
pub fn transmission_energy_wh(link: &LinkSpec, bytes: u64) -> f64 {
    bytes as f64 / 1e9 * link.energy_wh_per_gb
}

/// A completed link traversal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Traversal {
    pub latency_ms: f64,
    pub attempts: u32,
}

/// Moves `bytes` across `link` once, in the given backhaul phase.
///
/// * The uplink is refused outright while the backhaul is down.
/// * In normal operation each attempt succeeds with the link's reliability;
///   one retry is taken after `retry_backoff_ms`, and the reported latency
///   then includes the lost first attempt plus the backoff.
/// * Inside an unstable window the per-task availability gate (drawn by the
///   caller) replaces reliability draws, and no retry is granted.
pub fn traverse<R: Rng + ?Sized>(
    link: &LinkSpec,
    bytes: u64,
    phase: OutagePhase,
    tuning: &EngineTuning,
    rng: &mut R,
) -> Result<Traversal, NetworkError> {
    if link.tier == LinkTier::Uplink && phase == OutagePhase::Down {
        return Err(NetworkError::LinkUnavailable { tier: link.tier });
    }
    let ser = serialization_ms(link, bytes);
    let first = ser + propagation_ms(link, rng);
    let reliable = link.reliability >= 1.0
        || (link.tier == LinkTier::Uplink && phase == OutagePhase::Unstable)
        || rng.random::<f64>() < link.reliability;
    if reliable {
        return Ok(Traversal { latency_ms: first, attempts: 1 });
    }
    if phase != OutagePhase::Normal {
        return Err(NetworkError::LinkUnavailable { tier: link.tier });
    }
    let second = ser + propagation_ms(link, rng);
    if rng.random::<f64>() < link.reliability {
        Ok(Traversal { latency_ms: first + tuning.retry_backoff_ms + second, attempts: 2 })
    } else {
        Err(NetworkError::LinkUnavailable { tier: link.tier })
    }
}

/// Per-task uplink availability gate for unstable windows.
pub fn unstable_uplink_available<R: Rng + ?Sized>(link: &LinkSpec, rng: &mut R) -> bool {
    rng.random::<f64>() < link.unstable_availability
}
