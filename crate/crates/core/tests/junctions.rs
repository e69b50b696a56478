mod common;

use burstsim::initiator::{Initiator, Request};
use burstsim::junctions::{build_crosspoint, AddrMap, Fallback, Xbar, XbarConfig};
use burstsim::kernel::{CompId, Netlist, NetlistBuilder};
use burstsim::memory::{LatencyMem, MemConfig, MemInit, SimplexMem};
use burstsim::protocol::{Budget, Dir, Resp};
use common::*;

const REGION: u64 = 0x10000;
const INIT: MemInit = MemInit::Pattern(11);

fn latency_mem(m: usize, id_bits: u8, seed: u64) -> LatencyMem {
    let mut c = MemConfig::new(8, id_bits, m as u64 * REGION, REGION);
    c.init = INIT;
    LatencyMem::new(c, (1, 12), 8, seed).unwrap()
}

/// Initiator `i` uses its own slice of every memory region.
fn slices(i: usize, regions: usize) -> Vec<(u64, u64)> {
    (0..regions)
        .map(|m| {
            let lo = m as u64 * REGION + i as u64 * 0x2000;
            (lo, lo + 0x2000)
        })
        .collect()
}

fn random_xbar(flags: [bool; 5], seed: u64) -> (Netlist, Vec<CompId>) {
    let mut b = NetlistBuilder::new();
    let map = AddrMap::contiguous(0, REGION, 4, Fallback::ErrorSlave);
    let x = b.add("xbar", Xbar::new(XbarConfig::new(4, 4, 8, 3, map).with_pipeline(flags)).unwrap());
    let mut inits = Vec::new();
    for i in 0..4 {
        let init = b.add(
            format!("init{i}"),
            random_initiator(init_cfg(8, 3, seed * 16 + i as u64), slices(i, 4), 8),
        );
        b.connect(init.m(0), x.s(i)).unwrap();
        inits.push(init);
    }
    for m in 0..4 {
        let mem = b.add(format!("mem{m}"), latency_mem(m, 5, seed * 16 + m as u64));
        b.connect(x.m(m), mem.s(0)).unwrap();
    }
    b.monitor_all();
    (b.build().unwrap(), inits)
}

#[test]
fn random_traffic_is_clean_and_correct() {
    for seed in 0..3 {
        let (mut net, inits) = random_xbar([false; 5], seed);
        run_clean(&mut net, 4000, 2000);
        let recs = all_records(&net, &inits);
        assert!(recs.len() > 500, "only {} transactions", recs.len());
        check_records(&recs, INIT);
    }
}

#[test]
fn every_pipeline_combination_drains() {
    for bits in 0..32u32 {
        let flags: [bool; 5] = std::array::from_fn(|i| bits >> i & 1 == 1);
        let (mut net, inits) = random_xbar(flags, bits as u64);
        run_clean(&mut net, 1500, 10_000);
        check_records(&all_records(&net, &inits), INIT);
    }
}

fn single_path(flags: [bool; 5]) -> (Netlist, CompId) {
    let mut b = NetlistBuilder::new();
    let map = AddrMap::contiguous(0, REGION, 2, Fallback::ErrorSlave);
    let x = b.add("xbar", Xbar::new(XbarConfig::new(2, 2, 8, 2, map).with_pipeline(flags)).unwrap());
    let i = b.add(
        "init",
        script_initiator(init_cfg(8, 2, 0), vec![Request::read(0x40, 0, 8, 0), Request::read(0x5_0000, 3, 8, 1)]),
    );
    let idle = b.add("idle", script_initiator(init_cfg(8, 2, 1), vec![]));
    b.connect(i.m(0), x.s(0)).unwrap();
    b.connect(idle.m(0), x.s(1)).unwrap();
    for m in 0..2 {
        let mut c = MemConfig::new(8, 3, m as u64 * REGION, REGION);
        c.init = INIT;
        let mem = b.add(format!("mem{m}"), SimplexMem::new(c).unwrap());
        b.connect(x.m(m), mem.s(0)).unwrap();
    }
    b.monitor_all();
    (b.build().unwrap(), i)
}

#[test]
fn pipelining_adds_one_cycle_per_direction() {
    let lat = |flags| {
        let (mut net, i) = single_path(flags);
        run_clean(&mut net, 30, 100);
        let r = &net.component::<Initiator>(i).unwrap().records()[0];
        r.completed - r.issued
    };
    let wire = lat([false; 5]);
    assert_eq!(wire, 2, "memory latency only");
    assert_eq!(lat([true; 5]), wire + 2);
}

#[test]
fn error_slave_answers_every_beat() {
    let (mut net, i) = single_path([false; 5]);
    run_clean(&mut net, 30, 100);
    let recs = net.component::<Initiator>(i).unwrap().records();
    let bad = recs.iter().find(|r| r.cmd.addr == 0x5_0000).unwrap();
    assert_eq!(bad.resp, Resp::DecodeError);
    let l = net.master_link(i.m(0));
    let stats = net.monitor(l).unwrap().stats();
    assert_eq!(stats.beats[burstsim::kernel::Chan::R.index()], 1 + 4);
}

#[test]
fn same_id_to_other_port_waits() {
    let mut b = NetlistBuilder::new();
    let map = AddrMap::contiguous(0, REGION, 2, Fallback::ErrorSlave);
    let x = b.add("demux", Xbar::demux(2, 8, 2, map).unwrap());
    let mut cfg = init_cfg(8, 2, 0);
    cfg.avoid_hazards = false;
    let reqs = vec![
        Request::write(0x0, 7, 8, 1),
        Request::write(REGION, 0, 8, 1),
        Request::write(REGION + 0x100, 0, 8, 2),
    ];
    let i = b.add("init", script_initiator(cfg, reqs));
    b.connect(i.m(0), x.s(0)).unwrap();
    for m in 0..2 {
        let mem = b.add(format!("mem{m}"), latency_mem(m, 2, 3));
        b.connect(x.m(m), mem.s(0)).unwrap();
    }
    b.monitor_all();
    let mut net = b.build().unwrap();
    run_clean(&mut net, 60, 200);
    let recs = net.component::<Initiator>(i).unwrap().records();
    let first = recs.iter().find(|r| r.seq == 0).unwrap();
    let second = recs.iter().find(|r| r.seq == 1).unwrap();
    assert!(second.issued >= first.completed, "{first:?} {second:?}");
}

#[test]
fn muxed_equal_ids_stay_independent() {
    let mut b = NetlistBuilder::new();
    let x = b.add("mux", Xbar::mux(2, 8, 1).unwrap());
    let mut inits = Vec::new();
    for s in 0..2 {
        let init = b.add(
            format!("init{s}"),
            random_initiator(init_cfg(8, 1, s as u64), vec![(s as u64 * 0x4000, (s as u64 + 1) * 0x4000)], 1),
        );
        b.connect(init.m(0), x.s(s)).unwrap();
        inits.push(init);
    }
    let mem = b.add("mem", latency_mem(0, 2, 9));
    b.connect(x.m(0), mem.s(0)).unwrap();
    b.monitor_all();
    let mut net = b.build().unwrap();
    run_clean(&mut net, 3000, 1000);
    check_records(&all_records(&net, &inits), INIT);
}

#[test]
fn permutation_sustains_full_rate() {
    let mut b = NetlistBuilder::new();
    let map = AddrMap::contiguous(0, REGION, 4, Fallback::ErrorSlave);
    let x = b.add("xbar", Xbar::new(XbarConfig::new(4, 4, 8, 2, map)).unwrap());
    let mut mems = Vec::new();
    for i in 0..4 {
        let dst = (i + 1) % 4;
        let reqs: Vec<Request> = (0..64).map(|k| Request::read(dst as u64 * REGION + (k % 16) * 0x800, 255, 8, 0)).collect();
        let mut cfg = init_cfg(8, 2, i as u64);
        cfg.record = false;
        let init = b.add(format!("init{i}"), script_initiator(cfg, reqs));
        b.connect(init.m(0), x.s(i)).unwrap();
    }
    for m in 0..4 {
        let mut c = MemConfig::new(8, 4, m as u64 * REGION, REGION);
        c.resp_depth = 4;
        let mem = b.add(format!("mem{m}"), SimplexMem::new(c).unwrap());
        mems.push(b.connect(x.m(m), mem.s(0)).unwrap());
    }
    for &l in &mems {
        b.monitor(l, None);
    }
    let mut net = b.build().unwrap();
    net.run(100);
    let before: Vec<u64> = mems.iter().map(|&l| net.monitor(l).unwrap().stats().beats[4]).collect();
    net.run(4000);
    for (k, &l) in mems.iter().enumerate() {
        let beats = net.monitor(l).unwrap().stats().beats[4] - before[k];
        let rate = beats as f64 / 4000.0;
        assert!(rate >= 0.95, "port {k}: {rate}");
    }
}

#[test]
fn crosspoint_keeps_id_width() {
    let mut b = NetlistBuilder::new();
    let map = AddrMap::contiguous(0, REGION, 4, Fallback::ErrorSlave);
    let budget = Budget {
        unique_ids: 4,
        per_id: 4,
        total: 8,
    };
    let xp = build_crosspoint(&mut b, "xp", XbarConfig::new(4, 4, 8, 6, map), &[budget]).unwrap();
    for (m, p) in xp.masters.iter().enumerate() {
        assert_eq!(b.master_spec(*p).unwrap().id_bits, 6);
        let mem = b.add(format!("mem{m}"), latency_mem(m, 6, 1));
        b.connect(*p, mem.s(0)).unwrap();
    }
    for (s, p) in xp.slaves.iter().enumerate() {
        let init = b.add(format!("init{s}"), random_initiator(init_cfg(8, 6, s as u64), slices(s, 4), 64));
        b.connect(init.m(0), *p).unwrap();
    }
    let zero = Budget {
        unique_ids: 0,
        ..budget
    };
    let mut b2 = NetlistBuilder::new();
    let map = AddrMap::single(0);
    assert!(build_crosspoint(&mut b2, "bad", XbarConfig::new(2, 2, 8, 2, map), &[zero]).is_err());
    b.monitor_all();
    let mut net = b.build().unwrap();
    run_clean(&mut net, 3000, 2000);
}

#[test]
fn crosspoint_chain_is_clean() {
    let mut b = NetlistBuilder::new();
    let budget = Budget {
        unique_ids: 4,
        per_id: 4,
        total: 8,
    };
    // Three 2x2 crosspoints in a line; port 0 of each goes on to the next
    // stage, port 1 to a local memory.
    let mut inputs = Vec::new();
    let mut prev: Option<burstsim::kernel::PortRef> = None;
    for k in 0..3 {
        let local = (k as u64 + 1) * REGION;
        let map = AddrMap::new(
            vec![burstsim::junctions::AddrRule {
                start: local,
                end: local + REGION,
                port: 1,
            }],
            if k == 2 { Fallback::ErrorSlave } else { Fallback::DefaultPort(0) },
        );
        let mut cfg = XbarConfig::new(2, 2, 8, 4, map);
        if k == 2 {
            cfg = cfg.disconnect(0, 0).disconnect(1, 0);
        }
        let xp = build_crosspoint(&mut b, &format!("xp{k}"), cfg, &[budget]).unwrap();
        let mem = b.add(format!("mem{k}"), latency_mem(k + 1, 4, k as u64));
        b.connect(xp.masters[1], mem.s(0)).unwrap();
        if let Some(p) = prev {
            b.connect(p, xp.slaves[0]).unwrap();
        } else {
            inputs.push(xp.slaves[0]);
        }
        inputs.push(xp.slaves[1]);
        prev = Some(xp.masters[0]);
    }
    let sink = b.add("sink", latency_mem(0, 4, 0));
    b.connect(prev.unwrap(), sink.s(0)).unwrap();
    let mut inits = Vec::new();
    // Traffic only flows forward along the chain.
    let stage = [0u64, 0, 1, 2];
    for (i, p) in inputs.into_iter().enumerate() {
        let ranges = (stage[i] + 1..4).map(|k| (k * REGION + i as u64 * 0x2000, k * REGION + (i as u64 + 1) * 0x2000)).collect();
        let init = b.add(format!("init{i}"), random_initiator(init_cfg(8, 4, i as u64), ranges, 16));
        b.connect(init.m(0), p).unwrap();
        inits.push(init);
    }
    b.monitor_all();
    let mut net = b.build().unwrap();
    run_clean(&mut net, 4000, 3000);
    let recs = all_records(&net, &inits);
    assert!(recs.iter().all(|r| r.resp == Resp::Okay));
    check_records(&recs, INIT);
    assert!(recs.iter().filter(|r| r.cmd.dir == Dir::Read).count() > 100);
}
