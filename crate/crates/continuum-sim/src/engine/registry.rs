//! Cluster membership: which peers a device can discover over the local mesh.

use crate::model::ScenarioConfig;

/// Mesh membership directory. All members join at simulation start; a short
/// discovery delay passes before peers can route work to them, mirroring
/// service announcement and capability exchange on a real mesh.
#[derive(Debug, Clone)]
pub struct ClusterRegistry {
    members: Vec<u32>,
    gpus: Vec<u32>,
    visible_from_s: f64,
}

impl ClusterRegistry {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let members: Vec<u32> = cfg
            .devices
            .iter()
            .enumerate()
            .filter(|(_, d)| d.mesh_member)
            .map(|(i, _)| i as u32)
            .collect();
        let gpus: Vec<u32> = cfg
            .devices
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_mesh_gpu())
            .map(|(i, _)| i as u32)
            .collect();
        ClusterRegistry { members, gpus, visible_from_s: cfg.engine.discovery_delay_s }
    }

    /// Accelerator-carrying peers discoverable at time `t_s`, in stable
    /// (device-index) order.
    pub fn discover_resources(&self, t_s: f64) -> &[u32] {
        if t_s >= self.visible_from_s {
            &self.gpus
        } else {
            &[]
        }
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }
}
