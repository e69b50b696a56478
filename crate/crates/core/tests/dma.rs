use std::collections::HashMap;

use burstsim::dma::{Dma, DmaConfig, Transfer1D};
use burstsim::kernel::{Chan, Netlist, NetlistBuilder};
use burstsim::memory::{DuplexMem, LatencyMem, MemConfig, MemInit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INIT: MemInit = MemInit::Pattern(11);

fn latency_net(dcfg: DmaConfig, jobs: &[Transfer1D], latency: u64) -> Netlist {
    let mut b = NetlistBuilder::new();
    let mut dma = Dma::new(dcfg).unwrap();
    for (k, &t) in jobs.iter().enumerate() {
        dma.copy(k as u64, t);
    }
    let d = b.add("dma", dma);
    let mut mc = MemConfig::new(dcfg.data_bytes, dcfg.id_bits, 0, 1 << 22);
    mc.init = INIT;
    let m = b.add("mem", LatencyMem::new(mc, (latency, latency), 64, 0).unwrap());
    let l = b.connect(d.m(0), m.s(0)).unwrap();
    b.monitor(l, None);
    b.build().unwrap()
}

fn w_beats(net: &Netlist) -> u64 {
    let l = net.master_link(net.find("dma").unwrap().m(0));
    net.monitor(l).unwrap().stats().beats[Chan::W.index()]
}

/// Write beats per cycle between the first and the last write beat.
fn steady_write_rate(dcfg: DmaConfig, latency: u64, bytes: u64) -> f64 {
    let t = Transfer1D {
        src: 0,
        dst: 1 << 21,
        len: bytes,
    };
    let mut net = latency_net(dcfg, &[t], latency);
    let l = net.master_link(net.find("dma").unwrap().m(0));
    let (mut first, mut last) = (None, 0);
    while net.cycle() < 200_000 {
        net.step();
        let s = net.signals(l);
        if s.valid(Chan::W) && s.ready(Chan::W) {
            first.get_or_insert(net.cycle());
            last = net.cycle();
        }
        let dma = net.component::<Dma>(net.find("dma").unwrap()).unwrap();
        if dma.completions().len() == 1 {
            break;
        }
    }
    assert!(net.violations().is_empty(), "{:?}", net.violations().first());
    assert_eq!(w_beats(&net), bytes / dcfg.data_bytes as u64);
    w_beats(&net) as f64 / (last - first.unwrap() + 1) as f64
}

#[test]
fn zero_latency_streams_one_beat_per_cycle() {
    let rate = steady_write_rate(DmaConfig::new(64, 2), 1, 64 * 4096);
    assert!(rate > 0.99, "rate {rate}");
}

#[test]
fn outstanding_bursts_hide_latency() {
    let mut c = DmaConfig::new(64, 2);
    c.max_beats = 16;
    let rate = steady_write_rate(c, 10, 64 * 4096);
    assert!(rate >= 0.8, "rate {rate}");
}

#[test]
fn single_outstanding_matches_round_trip_model() {
    let mut c = DmaConfig::new(64, 2);
    c.max_outstanding = 1;
    for (burst, latency) in [(16u64, 10u64), (8, 20), (32, 4)] {
        c.max_beats = burst as usize;
        let rate = steady_write_rate(c, latency, 64 * burst * 64);
        // One burst pair per round trip: read latency, burst beats, then the
        // write response after the write latency.
        let model = burst as f64 / (burst + 2 * latency) as f64;
        assert!((rate - model).abs() / model < 0.2, "burst {burst} latency {latency}: {rate} vs {model}");
    }
}

#[test]
fn memcpy_matches_golden_copy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let src_span = 0x10000u64;
    let dst_base = 0x20000u64;
    let dst_span = 0x10000u64;
    let mut jobs = Vec::new();
    while jobs.len() < 1200 {
        let len = rng.gen_range(1..=600);
        jobs.push(Transfer1D {
            src: rng.gen_range(0..src_span - len),
            dst: dst_base + rng.gen_range(0..dst_span - len),
            len,
        });
    }
    for width in [8usize, 64] {
        let mut b = NetlistBuilder::new();
        let mut cfg = DmaConfig::new(width, 2);
        cfg.max_beats = 32;
        let mut dma = Dma::new(cfg).unwrap();
        for (k, &t) in jobs.iter().enumerate() {
            dma.copy(k as u64, t);
        }
        let d = b.add("dma", dma);
        let mut mc = MemConfig::new(width, 2, 0, 0x40000);
        mc.init = INIT;
        let m = b.add("mem", DuplexMem::new(mc).unwrap());
        b.connect(d.m(0), m.s(0)).unwrap();
        b.monitor_all();
        let mut net = b.build().unwrap();
        while net.component::<Dma>(d).unwrap().pending_jobs() > 0 && net.cycle() < 2_000_000 {
            net.run(1000);
        }
        net.drain(1000).unwrap();
        assert!(net.violations().is_empty(), "{:?}", net.violations().first());
        let dma = net.component::<Dma>(d).unwrap();
        assert_eq!(dma.completions().len(), jobs.len());
        assert!(dma.completions().iter().all(|c| c.errors == 0));

        let mut golden: HashMap<u64, u8> = HashMap::new();
        for t in &jobs {
            for i in 0..t.len {
                golden.insert(t.dst + i, INIT.byte(t.src + i));
            }
        }
        let mem = net.component::<DuplexMem>(m).unwrap();
        for a in dst_base..dst_base + dst_span {
            let want = golden.get(&a).copied().unwrap_or_else(|| INIT.byte(a));
            assert_eq!(mem.peek(a), want, "width {width} byte {a:#x}");
        }
    }
}
