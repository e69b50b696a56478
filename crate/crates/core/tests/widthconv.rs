mod common;

use burstsim::initiator::{Initiator, RandomSource, Request};
use burstsim::kernel::{Chan, CompId, Cut, Netlist, NetlistBuilder, PortSpec};
use burstsim::memory::{LatencyMem, MemConfig, MemInit};
use burstsim::widthconv::{Downsizer, DownsizerConfig, Upsizer, UpsizerConfig};
use common::*;

const INIT: MemInit = MemInit::Pattern(3);
const SIZE: u64 = 0x8000;

fn mem(data_bytes: usize, seed: u64) -> LatencyMem {
    let mut c = MemConfig::new(data_bytes, 3, 0, SIZE);
    c.init = INIT;
    LatencyMem::new(c, (1, 8), 8, seed).unwrap()
}

fn source(data_bytes: usize, fixed: f64) -> RandomSource {
    let mut s = RandomSource::new(vec![(0, SIZE)], data_bytes, 4);
    s.narrow = true;
    s.unaligned = true;
    s.beats = (1, 32);
    s.fixed_fraction = fixed;
    s
}

enum Path {
    Up,
    Down,
    UpDown,
}

fn build(path: Path, seed: u64) -> (Netlist, CompId) {
    let mut b = NetlistBuilder::new();
    let (init_w, mem_w) = match path {
        Path::Up => (8, 64),
        Path::Down => (64, 8),
        Path::UpDown => (8, 8),
    };
    let mut cfg = init_cfg(init_w, 3, seed);
    cfg.random_strobes = true;
    cfg.ready_prob = 0.8;
    let i = b.add("init", Initiator::new(cfg, Box::new(source(init_w, 0.2))).unwrap());
    let m = b.add("mem", mem(mem_w, seed));
    match path {
        Path::Up => {
            let u = b.add("up", Upsizer::new(UpsizerConfig::new(8, 64, 3)).unwrap());
            b.connect(i.m(0), u.s(0)).unwrap();
            b.connect(u.m(0), m.s(0)).unwrap();
        }
        Path::Down => {
            let d = b.add("down", Downsizer::new(DownsizerConfig::new(64, 8, 3)).unwrap());
            b.connect(i.m(0), d.s(0)).unwrap();
            b.connect(d.m(0), m.s(0)).unwrap();
        }
        Path::UpDown => {
            let u = b.add("up", Upsizer::new(UpsizerConfig::new(8, 64, 3)).unwrap());
            let w = b.add("wire", Cut::new(PortSpec::new(64, 3), [false; 5]));
            let d = b.add("down", Downsizer::new(DownsizerConfig::new(64, 8, 3)).unwrap());
            b.connect(i.m(0), u.s(0)).unwrap();
            b.connect(u.m(0), w.s(0)).unwrap();
            b.connect(w.m(0), d.s(0)).unwrap();
            b.connect(d.m(0), m.s(0)).unwrap();
        }
    }
    b.monitor_all();
    (b.build().unwrap(), i)
}

#[test]
fn upsizer_matches_golden_memory() {
    for seed in 0..4 {
        let (mut net, i) = build(Path::Up, seed);
        run_clean(&mut net, 3000, 2000);
        let recs = net.component::<Initiator>(i).unwrap().records();
        assert!(recs.len() > 100);
        check_records(recs, INIT);
    }
}

#[test]
fn downsizer_matches_golden_memory() {
    for seed in 0..4 {
        let (mut net, i) = build(Path::Down, seed);
        run_clean(&mut net, 3000, 4000);
        let recs = net.component::<Initiator>(i).unwrap().records();
        assert!(recs.len() > 50);
        check_records(recs, INIT);
    }
}

#[test]
fn up_then_down_is_transparent() {
    for seed in 0..4 {
        let (mut net, i) = build(Path::UpDown, seed);
        run_clean(&mut net, 3000, 4000);
        check_records(net.component::<Initiator>(i).unwrap().records(), INIT);
    }
}

fn single(reqs: Vec<Request>, narrow: usize, wide: usize, up: bool) -> Netlist {
    let mut b = NetlistBuilder::new();
    let (iw, mw) = if up { (narrow, wide) } else { (wide, narrow) };
    let i = b.add("init", script_initiator(init_cfg(iw, 3, 0), reqs));
    let m = b.add("mem", mem(mw, 0));
    let conv = if up {
        b.add("conv", Upsizer::new(UpsizerConfig::new(narrow, wide, 3)).unwrap())
    } else {
        b.add("conv", Downsizer::new(DownsizerConfig::new(wide, narrow, 3)).unwrap())
    };
    b.connect(i.m(0), conv.s(0)).unwrap();
    let l = b.connect(conv.m(0), m.s(0)).unwrap();
    b.monitor_all();
    b.trace(l);
    let mut net = b.build().unwrap();
    run_clean(&mut net, 100, 10_000);
    net
}

fn wide_beats(net: &Netlist, chan: Chan) -> u64 {
    let l = net.slave_link(net.find("mem").unwrap().s(0));
    net.monitor(l).unwrap().stats().beats[chan.index()]
}

#[test]
fn beat_count_law() {
    // Eight aligned 8-byte beats fill one 64-byte word.
    let net = single(vec![Request::write(0, 7, 8, 0)], 8, 64, true);
    assert_eq!(wide_beats(&net, Chan::W), 1);
    let net = single(vec![Request::write(0x38, 1, 8, 0)], 8, 64, true);
    assert_eq!(wide_beats(&net, Chan::W), 2);
    let net = single(vec![Request::write(0x08, 0, 8, 0)], 8, 64, true);
    let l = net.slave_link(net.find("mem").unwrap().s(0));
    let w = &net.trace(l).unwrap().w;
    let beat = w.iter().find(|s| s.valid && s.ready).unwrap().payload.as_ref().unwrap();
    assert_eq!(beat.strb, 0xFF << 8);
    // 64 wide beats onto a byte-wide bus: 16 bursts of 256.
    let net = single(vec![Request::read(0, 63, 64, 0)], 1, 64, false);
    assert_eq!(wide_beats(&net, Chan::Ar), 16);
    assert_eq!(wide_beats(&net, Chan::R), 4096);
}

/// Reads of one wide beat each from two IDs: a second read slot lets the
/// second ID overlap the first one's memory latency.
#[test]
fn parallel_read_slots_double_throughput() {
    let rate = |slots: usize| {
        let mut b = NetlistBuilder::new();
        let reqs: Vec<Request> = (0..200).map(|k| Request::read((k % 64) * 64, 7, 8, (k % 2) as u32)).collect();
        let mut cfg = init_cfg(8, 3, 0);
        cfg.record = false;
        cfg.max_per_id = 1;
        let i = b.add("init", script_initiator(cfg, reqs));
        let mut uc = UpsizerConfig::new(8, 64, 3);
        uc.read_slots = slots;
        let u = b.add("up", Upsizer::new(uc).unwrap());
        let mut mc = MemConfig::new(64, 3, 0, SIZE);
        mc.init = INIT;
        let m = b.add("mem", LatencyMem::new(mc, (12, 12), 8, 0).unwrap());
        b.connect(i.m(0), u.s(0)).unwrap();
        let l = b.connect(u.m(0), m.s(0)).unwrap();
        b.monitor(l, None);
        let mut net = b.build().unwrap();
        net.run(2000);
        net.monitor(l).unwrap().stats().beats[Chan::R.index()] as f64 / 2000.0
    };
    let one = rate(1);
    let two = rate(2);
    assert!(two >= 1.9 * one, "one slot {one}, two slots {two}");
}
