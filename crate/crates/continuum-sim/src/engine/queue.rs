//! FIFO multi-slot service queue for one device.

/// A device's processing capacity: `servers` parallel slots, each serving one
/// task at a time. Arrivals take the earliest-free slot; with all slots busy
/// they wait in FIFO order (callers feed arrivals in nondecreasing time).
#[derive(Debug, Clone)]
pub struct ServerQueue {
    busy_until: Vec<f64>,
    /// Total service seconds delivered (summed across slots).
    pub busy_s: f64,
    /// Total time arrivals spent waiting for a free slot.
    pub wait_ms: f64,
    pub served: u64,
}

impl ServerQueue {
    pub fn new(servers: u32) -> Self {
        ServerQueue { busy_until: vec![0.0; servers.max(1) as usize], busy_s: 0.0, wait_ms: 0.0, served: 0 }
    }

    /// Admits one arrival, returning `(service_start_s, service_end_s)`.
    pub fn serve(&mut self, arrival_s: f64, service_s: f64) -> (f64, f64) {
        let slot = self
            .busy_until
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("queue has at least one slot");
        let start = arrival_s.max(self.busy_until[slot]);
        let end = start + service_s;
        self.busy_until[slot] = end;
        self.busy_s += service_s;
        self.wait_ms += (start - arrival_s) * 1e3;
        self.served += 1;
        (start, end)
    }

    pub fn servers(&self) -> u32 {
        self.busy_until.len() as u32
    }
}
