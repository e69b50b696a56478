//! Golden-memory oracle: replays what the generators and DMA engines did
//! against a flat byte map and compares reads and final memory contents.
//!
//! Each generator and each DMA engine is one agent with a program order
//! (issue order, job order). A byte written by two agents has no single
//! expected value and is skipped, as are destinations of jobs that did not
//! complete cleanly.

use std::collections::{HashMap, HashSet};
use std::fmt;

use burstsim::dma::JobKind;
use burstsim::initiator::Record;
use burstsim::protocol::Dir;

use crate::topology::Sim;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub addr: u64,
    pub expected: u8,
    pub actual: u8,
    pub context: String,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "byte {:#x}: expected {:#04x}, found {:#04x} ({})",
            self.addr, self.expected, self.actual, self.context
        )
    }
}

impl std::error::Error for Mismatch {}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleReport {
    pub read_bytes: u64,
    pub final_bytes: u64,
    /// Bytes left unchecked because their expected value is ambiguous.
    pub skipped: u64,
    pub dma_jobs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Owner {
    One(usize),
    Many,
}

fn claim(owners: &mut HashMap<u64, Owner>, addr: u64, agent: usize) {
    owners
        .entry(addr)
        .and_modify(|o| {
            if *o != Owner::One(agent) {
                *o = Owner::Many
            }
        })
        .or_insert(Owner::One(agent));
}

/// Checks a drained run. Generators must have been built with recording
/// on, and caches flushed.
pub fn golden_memory_check(sim: &Sim) -> Result<OracleReport, Mismatch> {
    let mut report = OracleReport::default();
    let gens: Vec<Vec<&Record>> = sim
        .generators
        .iter()
        .map(|(name, _)| {
            let mut v: Vec<&Record> = sim.initiator(name).unwrap().records().iter().collect();
            v.sort_by_key(|r| r.seq);
            v
        })
        .collect();
    let ng = gens.len();

    let mut owners: HashMap<u64, Owner> = HashMap::new();
    for (g, recs) in gens.iter().enumerate() {
        for r in recs.iter().filter(|r| r.cmd.dir == Dir::Write && !r.resp.is_error()) {
            for &(a, _) in &r.bytes {
                claim(&mut owners, a, g);
            }
        }
    }
    // Destinations of started but unfinished or failed jobs may hold
    // anything.
    let mut tainted: HashSet<u64> = HashSet::new();
    let mut dma_done: Vec<HashSet<u64>> = Vec::new();
    for (k, d) in sim.dmas.iter().enumerate() {
        let dma = sim.net.component::<burstsim::dma::Dma>(d.comp).unwrap();
        let ok: HashSet<u64> = dma.completions().iter().filter(|c| c.errors == 0).map(|c| c.id).collect();
        let unstarted: HashSet<u64> = dma.queued_jobs().map(|j| j.id).collect();
        for j in d.jobs.iter().filter(|j| !unstarted.contains(&j.id)) {
            if let JobKind::Copy(t) = j.kind {
                for a in t.dst..t.dst + t.len {
                    if ok.contains(&j.id) {
                        claim(&mut owners, a, ng + k);
                    } else {
                        tainted.insert(a);
                    }
                }
            }
        }
        dma_done.push(ok);
    }
    for a in &tainted {
        owners.insert(*a, Owner::Many);
    }

    let mut finals: HashMap<u64, (u8, String)> = HashMap::new();
    for (g, recs) in gens.iter().enumerate() {
        let name = &sim.generators[g].0;
        let mut image: HashMap<u64, u8> = HashMap::new();
        for r in recs.iter().filter(|r| !r.resp.is_error()) {
            match r.cmd.dir {
                Dir::Write => image.extend(r.bytes.iter().copied()),
                Dir::Read => {
                    for &(a, v) in &r.bytes {
                        if owners.get(&a).is_some_and(|&o| o != Owner::One(g)) {
                            report.skipped += 1;
                            continue;
                        }
                        let want = image.get(&a).copied().unwrap_or_else(|| sim.init_byte(a));
                        if v != want {
                            return Err(Mismatch {
                                addr: a,
                                expected: want,
                                actual: v,
                                context: format!("{name} read at {:#x} issued in cycle {}", r.cmd.addr, r.issued),
                            });
                        }
                        report.read_bytes += 1;
                    }
                }
            }
        }
        for (a, v) in image {
            if owners.get(&a) == Some(&Owner::One(g)) {
                finals.insert(a, (v, format!("last write by {name}")));
            }
        }
    }

    for (k, d) in sim.dmas.iter().enumerate() {
        for j in d.jobs.iter().filter(|j| dma_done[k].contains(&j.id)) {
            let JobKind::Copy(t) = j.kind else { continue };
            report.dma_jobs += 1;
            for i in 0..t.len {
                let dst = t.dst + i;
                if owners.get(&dst) != Some(&Owner::One(ng + k)) {
                    continue;
                }
                if owners.contains_key(&(t.src + i)) {
                    // Source rewritten during the run.
                    finals.remove(&dst);
                    owners.insert(dst, Owner::Many);
                    continue;
                }
                finals.insert(
                    dst,
                    (sim.init_byte(t.src + i), format!("{} job {} from {:#x}", d.name, j.id, t.src + i)),
                );
            }
        }
    }

    report.skipped += owners.values().filter(|&&o| o == Owner::Many).count() as u64;
    let mut addrs: Vec<u64> = finals.keys().copied().collect();
    addrs.sort_unstable();
    for a in addrs {
        let (want, ctx) = &finals[&a];
        let Some(got) = sim.peek(a) else {
            report.skipped += 1;
            continue;
        };
        if got != *want {
            return Err(Mismatch {
                addr: a,
                expected: *want,
                actual: got,
                context: format!("final image, {ctx}"),
            });
        }
        report.final_bytes += 1;
    }
    Ok(report)
}
