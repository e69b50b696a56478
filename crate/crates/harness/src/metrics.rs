//! Per-link counters, latency histograms and their CSV form.

use std::collections::BTreeMap;
use std::io::Write;

use burstsim::kernel::Chan;
use burstsim::protocol::{Budget, ConcurrencyStats, LinkStats};

use crate::error::HarnessError;
use crate::topology::Sim;

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    pub name: String,
    pub data_bytes: usize,
    pub stats: LinkStats,
    pub concurrency: ConcurrencyStats,
    pub budget: Option<Budget>,
    /// The master end is a generator or a DMA engine.
    pub injection: bool,
}

impl LinkMetrics {
    pub fn beats_per_cycle(&self, c: Chan) -> f64 {
        if self.stats.cycles == 0 {
            return 0.0;
        }
        self.stats.beats[c.index()] as f64 / self.stats.cycles as f64
    }

    /// Every beat announced by an accepted command was delivered.
    pub fn conserved(&self) -> bool {
        let s = &self.stats;
        s.requested[0] == s.beats[Chan::R.index()] && s.requested[1] == s.beats[Chan::W.index()]
    }

    pub fn within_budget(&self) -> bool {
        self.budget.is_none_or(|b| {
            let c = &self.concurrency;
            (0..2).all(|d| c.max_unique_ids[d] <= b.unique_ids && c.max_per_id[d] <= b.per_id && c.max_total[d] <= b.total)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub cycles: u64,
    pub clock_ghz: f64,
    pub links: Vec<LinkMetrics>,
    /// Issue-to-completion latency over all generators, in cycles.
    pub latency: BTreeMap<u64, u64>,
}

impl Metrics {
    pub fn collect(sim: &Sim) -> Self {
        let net = &sim.net;
        let sources: Vec<_> = sim
            .generators
            .iter()
            .map(|g| g.1)
            .chain(sim.dmas.iter().map(|d| d.comp))
            .collect();
        let links = net
            .monitors()
            .map(|(l, m)| LinkMetrics {
                name: net.link_name(l).to_string(),
                data_bytes: net.link_spec(l).data_bytes,
                stats: *m.stats(),
                concurrency: m.scoreboard().stats(),
                budget: m.budget(),
                injection: sources.contains(&net.link_ends(l).0.comp),
            })
            .collect();
        let mut latency = BTreeMap::new();
        for (name, _) in &sim.generators {
            for (&k, &v) in sim.initiator(name).unwrap().latency() {
                *latency.entry(k).or_insert(0) += v;
            }
        }
        Self {
            cycles: net.cycle(),
            clock_ghz: sim.meta.clock_ghz,
            links,
            latency,
        }
    }

    pub fn link(&self, name: &str) -> Option<&LinkMetrics> {
        self.links.iter().find(|l| l.name == name)
    }

    /// Bytes per second on one channel of a link: beats x width x clock.
    pub fn bandwidth(&self, link: &LinkMetrics, c: Chan) -> f64 {
        link.beats_per_cycle(c) * link.data_bytes as f64 * self.clock_ghz * 1e9
    }

    /// Read plus write data bandwidth injected by all sources, in bytes per
    /// second.
    pub fn aggregate_bandwidth(&self) -> f64 {
        self.links
            .iter()
            .filter(|l| l.injection)
            .map(|l| self.bandwidth(l, Chan::R) + self.bandwidth(l, Chan::W))
            .sum()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["link", "channel", "beats", "stall_cycles", "util"])?;
        for l in &self.links {
            for c in Chan::ALL {
                w.write_record([
                    l.name.clone(),
                    c.name().to_string(),
                    l.stats.beats[c.index()].to_string(),
                    l.stats.stalls[c.index()].to_string(),
                    format!("{:.6}", l.beats_per_cycle(c)),
                ])?;
            }
        }
        w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
        Ok(())
    }

    pub fn write_latency_csv(&self, out: impl Write) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lat_bucket", "count"])?;
        for (k, v) in &self.latency {
            w.write_record([k.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(beats_r: u64, cycles: u64) -> LinkMetrics {
        let mut stats = LinkStats::default();
        stats.beats[Chan::R.index()] = beats_r;
        stats.requested[0] = beats_r;
        stats.cycles = cycles;
        LinkMetrics {
            name: "a->b".into(),
            data_bytes: 64,
            stats,
            concurrency: ConcurrencyStats::default(),
            budget: None,
            injection: true,
        }
    }

    #[test]
    fn bandwidth_is_beats_times_width_times_clock() {
        let m = Metrics {
            cycles: 1000,
            clock_ghz: 1.0,
            links: vec![link(500, 1000)],
            latency: BTreeMap::new(),
        };
        assert_eq!(m.bandwidth(&m.links[0], Chan::R), 32e9);
        assert_eq!(m.aggregate_bandwidth(), 32e9);
        assert!(m.links[0].conserved());
    }

    #[test]
    fn csv_has_one_row_per_channel() {
        let m = Metrics {
            cycles: 10,
            clock_ghz: 1.0,
            links: vec![link(5, 10)],
            latency: [(3, 2)].into_iter().collect(),
        };
        let mut out = Vec::new();
        m.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.contains("a->b,r,5,0,0.500000"));
        let mut lat = Vec::new();
        m.write_latency_csv(&mut lat).unwrap();
        assert_eq!(String::from_utf8(lat).unwrap(), "lat_bucket,count\n3,2\n");
    }
}
