mod common;

use std::collections::HashMap;

use burstsim::idconv::{RemapConfig, RemapTable, Remapper, Serializer, SerializerConfig};
use burstsim::kernel::{Component, NetlistBuilder};
use burstsim::memory::{LatencyMem, MemConfig, MemInit};
use burstsim::protocol::Dir;
use common::*;
use proptest::prelude::*;

const INIT: MemInit = MemInit::Pattern(5);

fn run_converter(conv: impl Component + 'static, out_bits: u8, seed: u64) {
    let mut b = NetlistBuilder::new();
    let mut cfg = init_cfg(8, 4, seed);
    cfg.ready_prob = 0.8;
    let i = b.add("init", random_initiator(cfg, vec![(0, 0x4000)], 16));
    let c = b.add("conv", conv);
    let mut mc = MemConfig::new(8, out_bits, 0, 0x4000);
    mc.init = INIT;
    let m = b.add("mem", LatencyMem::new(mc, (1, 20), 16, seed).unwrap());
    b.connect(i.m(0), c.s(0)).unwrap();
    b.connect(c.m(0), m.s(0)).unwrap();
    b.monitor_all();
    let mut net = b.build().unwrap();
    run_clean(&mut net, 4000, 5000);
    let recs = all_records(&net, &[i]);
    assert!(recs.len() > 200);
    check_records(&recs, INIT);
}

#[test]
fn remapper_end_to_end() {
    for seed in 0..4 {
        let r = Remapper::new(RemapConfig::new(8, 4, 2, 4, 2)).unwrap();
        run_converter(r, 2, seed);
    }
}

#[test]
fn serializer_end_to_end() {
    for seed in 0..4 {
        let s = Serializer::new(SerializerConfig {
            data_bytes: 8,
            in_bits: 4,
            out_bits: 1,
            depth: 4,
        })
        .unwrap();
        run_converter(s, 1, seed);
    }
}

#[test]
fn remapper_rejects_too_many_entries() {
    assert!(Remapper::new(RemapConfig::new(8, 4, 1, 3, 1)).is_err());
    assert!(Remapper::new(RemapConfig::new(8, 4, 2, 4, 0)).is_err());
}

#[derive(Debug, Clone)]
enum Op {
    Req(u32),
    Rsp(usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![(0u32..6).prop_map(Op::Req), (0usize..4).prop_map(Op::Rsp)]
}

proptest! {
    /// Distinct inputs never share an output, equal inputs always do, and
    /// responses restore the input.
    #[test]
    fn remap_table_keeps_ids_apart(ops in prop::collection::vec(op(), 0..64), per_id in 1usize..3) {
        let mut t = RemapTable::new(4, per_id, 4 * per_id);
        let mut model: HashMap<u32, (usize, usize)> = HashMap::new();
        for o in ops {
            match o {
                Op::Req(id) => {
                    let want = match model.get(&id) {
                        Some(&(_, n)) => n < per_id,
                        None => model.len() < 4,
                    };
                    let got = t.request(id);
                    prop_assert_eq!(got.is_some(), want);
                    if let Some(out) = got {
                        let e = model.entry(id).or_insert((out, 0));
                        prop_assert_eq!(e.0, out);
                        e.1 += 1;
                        prop_assert!(model.iter().all(|(&k, v)| k == id || v.0 != out));
                    }
                }
                Op::Rsp(out) => {
                    let owner = model.iter().find(|(_, v)| v.0 == out).map(|(&k, _)| k);
                    prop_assert_eq!(t.response(out, true), owner);
                    if let Some(k) = owner {
                        let e = model.get_mut(&k).unwrap();
                        e.1 -= 1;
                        if e.1 == 0 {
                            model.remove(&k);
                        }
                    }
                }
            }
            prop_assert_eq!(t.total(), model.values().map(|v| v.1).sum::<usize>());
        }
    }
}

#[test]
fn serializer_lane_holds_command_order() {
    let mut b = NetlistBuilder::new();
    let reqs: Vec<_> = [1u32, 3, 5, 7, 2]
        .iter()
        .map(|&id| burstsim::initiator::Request::read(0x100 * id as u64, 0, 8, id))
        .collect();
    let i = b.add("init", script_initiator(init_cfg(8, 4, 0), reqs));
    let s = b.add(
        "ser",
        Serializer::new(SerializerConfig {
            data_bytes: 8,
            in_bits: 4,
            out_bits: 1,
            depth: 8,
        })
        .unwrap(),
    );
    let mut mc = MemConfig::new(8, 1, 0, 0x4000);
    mc.init = INIT;
    let m = b.add("mem", LatencyMem::new(mc, (50, 50), 16, 0).unwrap());
    b.connect(i.m(0), s.s(0)).unwrap();
    b.connect(s.m(0), m.s(0)).unwrap();
    let mut net = b.build().unwrap();
    net.run(20);
    let ser = net.component::<Serializer>(s).unwrap();
    let odd: Vec<u32> = ser.lane(Dir::Read, 1).map(|t| t.value()).collect();
    let even: Vec<u32> = ser.lane(Dir::Read, 0).map(|t| t.value()).collect();
    assert_eq!(odd, vec![1, 3, 5, 7]);
    assert_eq!(even, vec![2]);
}
