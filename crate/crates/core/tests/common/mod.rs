#![allow(dead_code)]

use std::collections::HashMap;

use burstsim::initiator::{Initiator, InitiatorConfig, RandomSource, Record, Request, ScriptSource};
use burstsim::kernel::{CompId, Netlist};
use burstsim::memory::MemInit;
use burstsim::protocol::Dir;

/// Replays records in issue order against a flat byte map and checks every
/// read byte. Only valid when each initiator avoids hazards and initiators
/// touch disjoint bytes.
pub fn check_records(records: &[Record], init: MemInit) {
    let mut recs: Vec<&Record> = records.iter().collect();
    recs.sort_by_key(|r| r.seq);
    let mut mem: HashMap<u64, u8> = HashMap::new();
    for r in recs {
        if r.resp.is_error() {
            continue;
        }
        match r.cmd.dir {
            Dir::Write => {
                for &(a, v) in &r.bytes {
                    mem.insert(a, v);
                }
            }
            Dir::Read => {
                for &(a, v) in &r.bytes {
                    let want = mem.get(&a).copied().unwrap_or_else(|| init.byte(a));
                    assert_eq!(v, want, "read {:#x} (seq {}) at {a:#x}", r.cmd.tag, r.seq);
                }
            }
        }
    }
}

pub fn init_cfg(data_bytes: usize, id_bits: u8, seed: u64) -> InitiatorConfig {
    let mut c = InitiatorConfig::new(data_bytes, id_bits);
    c.record = true;
    c.seed = seed;
    c
}

pub fn random_initiator(cfg: InitiatorConfig, ranges: Vec<(u64, u64)>, ids: u32) -> Initiator {
    let mut src = RandomSource::new(ranges, cfg.data_bytes, ids);
    src.narrow = true;
    src.unaligned = true;
    src.beats = (1, 16);
    Initiator::new(cfg, Box::new(src)).unwrap()
}

pub fn script_initiator(cfg: InitiatorConfig, reqs: Vec<Request>) -> Initiator {
    Initiator::new(cfg, Box::new(ScriptSource::asap(reqs))).unwrap()
}

/// Runs, stops the sources, drains and asserts a clean run.
pub fn run_clean(net: &mut Netlist, cycles: u64, watchdog: u64) {
    net.run(cycles);
    if let Err(t) = net.drain(watchdog) {
        panic!("{t}");
    }
    let v = net.violations();
    assert!(v.is_empty(), "{} violations, first: {:?}", v.len(), v.first());
}

pub fn all_records(net: &Netlist, inits: &[CompId]) -> Vec<Record> {
    inits
        .iter()
        .flat_map(|&i| net.component::<Initiator>(i).unwrap().records().to_vec())
        .collect()
}
