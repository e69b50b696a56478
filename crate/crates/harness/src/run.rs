//! Batch runs: inject for a number of cycles, then drain under a watchdog.

use burstsim::kernel::Timeout;
use burstsim::protocol::Violation;

use crate::metrics::Metrics;
use crate::topology::Sim;

#[derive(Debug)]
pub struct RunOutcome {
    pub metrics: Metrics,
    pub violations: Vec<Violation>,
    pub timeout: Option<Timeout>,
    /// Cycles spent draining after injection stopped.
    pub drain_cycles: u64,
}

impl RunOutcome {
    pub fn clean(&self) -> bool {
        self.violations.is_empty() && self.timeout.is_none()
    }
}

/// Runs `cycles` of traffic, stops all sources and drains. Caches are
/// flushed afterwards so that memories hold the final image.
pub fn run(sim: &mut Sim, cycles: u64, watchdog: u64) -> RunOutcome {
    sim.net.run(cycles);
    let mut drained = sim.net.drain(watchdog);
    if drained.is_ok() && !sim.llcs.is_empty() {
        let first = *drained.as_ref().unwrap();
        sim.flush_caches();
        drained = sim.net.drain_time(watchdog).map(|d| d + first);
    }
    let (drain_cycles, timeout) = match drained {
        Ok(d) => (d, None),
        Err(t) => (t.waited, Some(t)),
    };
    RunOutcome {
        metrics: Metrics::collect(sim),
        violations: sim.net.violations().to_vec(),
        timeout,
        drain_cycles,
    }
}
