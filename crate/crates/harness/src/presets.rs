//! Generated topologies: the Manticore-mini hierarchy, a plain crossbar,
//! and one small bench per component.

use crate::config::*;

pub const CLUSTER_BASE: u64 = 0x1000_0000;
/// Address window of one cluster: DMA-side L1 in the lower half, core-side
/// memory in the upper half.
pub const CLUSTER_SPAN: u64 = 0x4_0000;
pub const HBM_BASE: u64 = 0x8000_0000;
pub const HBM_SIZE: u64 = 0x100_0000;

/// Parameters of the Manticore-mini hierarchy. The register-stage
/// placement is a calibration chosen so that the farthest core-to-core
/// round trip is 24 cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct ManticoreParams {
    pub l2_quadrants: usize,
    pub l1_per_l2: usize,
    pub clusters_per_l1: usize,
    pub dma_bytes: usize,
    pub core_bytes: usize,
    pub dma_id_bits: u8,
    pub core_id_bits: u8,
    /// Cores per cluster; each is one ID with one outstanding transaction.
    pub cores: usize,
    /// Registered channels of every uplink and downlink cut.
    pub cut_flags: [bool; 5],
    /// Registered channels inside every crossbar.
    pub xbar_pipeline: [bool; 5],
    pub hbm_latency: u64,
    pub dma_burst_beats: usize,
    pub dma_jobs: usize,
    /// Include the default random core and DMA traffic.
    pub traffic: bool,
}

impl Default for ManticoreParams {
    fn default() -> Self {
        Self {
            l2_quadrants: 2,
            l1_per_l2: 4,
            clusters_per_l1: 4,
            dma_bytes: 64,
            core_bytes: 8,
            dma_id_bits: 4,
            core_id_bits: 6,
            cores: 8,
            cut_flags: [true; 5],
            xbar_pipeline: [true; 5],
            hbm_latency: 40,
            dma_burst_beats: 8,
            dma_jobs: 2000,
            traffic: true,
        }
    }
}

/// Position of a cluster in the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Place {
    pub l2: usize,
    pub l1: usize,
    pub k: usize,
}

impl ManticoreParams {
    pub fn clusters(&self) -> usize {
        self.l2_quadrants * self.l1_per_l2 * self.clusters_per_l1
    }

    pub fn place(&self, c: usize) -> Place {
        let per_l2 = self.l1_per_l2 * self.clusters_per_l1;
        Place {
            l2: c / per_l2,
            l1: c % per_l2 / self.clusters_per_l1,
            k: c % self.clusters_per_l1,
        }
    }

    pub fn cluster_base(&self, c: usize) -> u64 {
        CLUSTER_BASE + c as u64 * CLUSTER_SPAN
    }

    /// DMA-side L1 memory of a cluster.
    pub fn l1_mem(&self, c: usize) -> [u64; 2] {
        let b = self.cluster_base(c);
        [b, b + CLUSTER_SPAN / 2]
    }

    /// Core-side memory of a cluster.
    pub fn core_mem(&self, c: usize) -> [u64; 2] {
        let b = self.cluster_base(c);
        [b + CLUSTER_SPAN / 2, b + CLUSTER_SPAN]
    }

    /// Read-only source and write destination halves of the L1 memory.
    pub fn l1_src(&self, c: usize) -> [u64; 2] {
        let [lo, hi] = self.l1_mem(c);
        [lo, (lo + hi) / 2]
    }

    pub fn l1_dst(&self, c: usize) -> [u64; 2] {
        let [lo, hi] = self.l1_mem(c);
        [(lo + hi) / 2, hi]
    }

    pub fn hbm_core(&self) -> [u64; 2] {
        [HBM_BASE, HBM_BASE + HBM_SIZE / 2]
    }

    pub fn hbm_src(&self) -> [u64; 2] {
        [HBM_BASE + HBM_SIZE / 2, HBM_BASE + HBM_SIZE * 3 / 4]
    }

    pub fn hbm_dst(&self) -> [u64; 2] {
        [HBM_BASE + HBM_SIZE * 3 / 4, HBM_BASE + HBM_SIZE]
    }

    fn stages(flags: [bool; 5]) -> u64 {
        // A read crosses the AR register going out and the R register back.
        flags[3] as u64 + flags[4] as u64
    }

    /// Registered stages between a core of cluster `a` and the memory of
    /// cluster `b`, there and back, plus the memory's own two-cycle access.
    pub fn core_round_trip(&self, a: usize, b: usize) -> u64 {
        let (pa, pb) = (self.place(a), self.place(b));
        let (cuts, xbars) = if pa.l2 != pb.l2 {
            (6, 5)
        } else if pa.l1 != pb.l1 {
            (4, 3)
        } else {
            (2, 1)
        };
        2 + cuts * Self::stages(self.cut_flags) + xbars * Self::stages(self.xbar_pipeline)
    }
}

fn generator(name: String, data_bytes: usize, id_bits: u8) -> GeneratorConfig {
    GeneratorConfig {
        name,
        data_bytes,
        id_bits,
        max_outstanding: 8,
        max_per_id: 8,
        ready_prob: 1.0,
        random_strobes: false,
    }
}

fn memory(name: String, kind: MemKind, data_bytes: usize, id_bits: u8, range: [u64; 2]) -> MemoryParams {
    MemoryParams {
        name,
        kind,
        data_bytes,
        id_bits,
        base: range[0],
        size: range[1] - range[0],
        banks: 2,
        extra_latency: 0,
        cmd_depth: None,
        resp_depth: None,
        latency: None,
        max_outstanding: 16,
        init_pattern: Some(range[0] >> 12 | 1),
    }
}

fn cut(name: String, data_bytes: usize, id_bits: u8, flags: [bool; 5]) -> ComponentConfig {
    ComponentConfig::Cut(CutParams {
        name,
        data_bytes,
        id_bits,
        flags,
        stages: 1,
    })
}

fn link(from: impl Into<String>, to: impl Into<String>) -> LinkConfig {
    LinkConfig {
        from: from.into(),
        to: to.into(),
        monitor: None,
        budget: None,
        trace: false,
    }
}

fn budgeted(from: impl Into<String>, to: impl Into<String>, b: [usize; 3]) -> LinkConfig {
    LinkConfig {
        budget: Some(b),
        ..link(from, to)
    }
}

struct Net {
    prefix: &'static str,
    data_bytes: usize,
    id_bits: u8,
    /// Budgets: cluster uplink, cluster downlink, L1 uplink, L2 uplink,
    /// L3 downlink, HBM.
    budgets: [[usize; 3]; 6],
}

fn crosspoint(name: String, net: &Net, slaves: usize, map: Vec<[u64; 3]>, up: Option<usize>, budget: Vec<[usize; 3]>, pipeline: [bool; 5]) -> ComponentConfig {
    ComponentConfig::Crosspoint(XbarParams {
        name,
        slaves,
        masters: budget.len(),
        data_bytes: net.data_bytes,
        id_bits: net.id_bits,
        map,
        default_port: up,
        // Traffic arriving from above never goes back up.
        error_fallback: up.map(|_| vec![slaves - 1]).unwrap_or_default(),
        pipeline,
        disconnect: vec![],
        max_per_id: 8,
        budget,
    })
}

/// Builds the Manticore-mini hierarchy: two physically separate trees, a
/// 64-byte DMA network and an 8-byte core network, sharing one HBM port.
pub fn manticore_mini(p: &ManticoreParams) -> TopologyConfig {
    let mut comps = Vec::new();
    let mut links = Vec::new();
    let nets = [
        Net {
            prefix: "dma",
            data_bytes: p.dma_bytes,
            id_bits: p.dma_id_bits,
            budgets: [[1, 8, 8], [1, 8, 8], [4, 8, 32], [16, 8, 32], [16, 8, 32], [16, 8, 32]],
        },
        Net {
            prefix: "core",
            data_bytes: p.core_bytes,
            id_bits: p.core_id_bits,
            budgets: [[8, 1, 8], [8, 1, 8], [32, 1, 32], [64, 1, 64], [64, 1, 64], [64, 1, 64]],
        },
    ];
    let per_l1 = p.clusters_per_l1;
    let per_l2 = p.l1_per_l2 * per_l1;

    for c in 0..p.clusters() {
        let pl = p.place(c);
        let cl = format!("c{c}");
        comps.push(ComponentConfig::Dma(DmaParams {
            name: format!("{cl}.dma"),
            data_bytes: p.dma_bytes,
            id_bits: p.dma_id_bits,
            max_outstanding: 8,
            max_beats: p.dma_burst_beats,
            buffer_beats: 64,
        }));
        comps.push(ComponentConfig::Memory(MemoryParams {
            banks: 4,
            ..memory(format!("{cl}.l1"), MemKind::Duplex, p.dma_bytes, p.dma_id_bits, p.l1_mem(c))
        }));
        comps.push(ComponentConfig::Generator(GeneratorConfig {
            max_outstanding: p.cores,
            max_per_id: 1,
            ..generator(format!("{cl}.core"), p.core_bytes, index_bits(p.cores))
        }));
        comps.push(ComponentConfig::Memory(MemoryParams {
            banks: 4,
            ..memory(format!("{cl}.tcdm"), MemKind::Duplex, p.core_bytes, p.core_id_bits, p.core_mem(c))
        }));
        for (net, master, mem) in [(&nets[0], "dma", "l1"), (&nets[1], "core", "tcdm")] {
            let (d, w) = (net.data_bytes, net.id_bits);
            let l1 = format!("{}.l1.{}.{}", net.prefix, pl.l2, pl.l1);
            comps.push(cut(format!("{cl}.{master}_up"), d, w, p.cut_flags));
            comps.push(cut(format!("{cl}.{master}_down"), d, w, p.cut_flags));
            links.push(budgeted(format!("{cl}.{master}"), format!("{cl}.{master}_up"), net.budgets[0]));
            links.push(link(format!("{cl}.{master}_up"), format!("{l1}.s{}", pl.k)));
            links.push(budgeted(format!("{l1}.m{}", pl.k), format!("{cl}.{master}_down"), net.budgets[1]));
            links.push(link(format!("{cl}.{master}_down"), format!("{cl}.{mem}")));
        }
    }

    for net in &nets {
        let (d, w, pre) = (net.data_bytes, net.id_bits, net.prefix);
        let local = |c: usize| if pre == "dma" { p.l1_mem(c) } else { p.core_mem(c) };
        for q2 in 0..p.l2_quadrants {
            for q1 in 0..p.l1_per_l2 {
                let name = format!("{pre}.l1.{q2}.{q1}");
                let first = q2 * per_l2 + q1 * per_l1;
                let map = (0..per_l1)
                    .map(|k| {
                        let [lo, hi] = local(first + k);
                        [lo, hi, k as u64]
                    })
                    .collect();
                let mut budget = vec![net.budgets[1]; per_l1];
                budget.push(net.budgets[2]);
                comps.push(crosspoint(name.clone(), net, per_l1 + 1, map, Some(per_l1), budget, p.xbar_pipeline));
                comps.push(cut(format!("{name}.up"), d, w, p.cut_flags));
                comps.push(cut(format!("{name}.down"), d, w, p.cut_flags));
                let l2 = format!("{pre}.l2.{q2}");
                links.push(budgeted(format!("{name}.m{per_l1}"), format!("{name}.up"), net.budgets[2]));
                links.push(link(format!("{name}.up"), format!("{l2}.s{q1}")));
                links.push(budgeted(format!("{l2}.m{q1}"), format!("{name}.down"), net.budgets[2]));
                links.push(link(format!("{name}.down"), format!("{name}.s{per_l1}")));
            }
            let name = format!("{pre}.l2.{q2}");
            let map = (0..p.l1_per_l2)
                .map(|q1| {
                    let first = q2 * per_l2 + q1 * per_l1;
                    [p.cluster_base(first), p.cluster_base(first + per_l1), q1 as u64]
                })
                .collect();
            let mut budget = vec![net.budgets[2]; p.l1_per_l2];
            budget.push(net.budgets[3]);
            comps.push(crosspoint(name.clone(), net, p.l1_per_l2 + 1, map, Some(p.l1_per_l2), budget, p.xbar_pipeline));
            comps.push(cut(format!("{name}.up"), d, w, p.cut_flags));
            comps.push(cut(format!("{name}.down"), d, w, p.cut_flags));
            links.push(budgeted(format!("{name}.m{}", p.l1_per_l2), format!("{name}.up"), net.budgets[3]));
            links.push(link(format!("{name}.up"), format!("{pre}.l3.s{q2}")));
            links.push(budgeted(format!("{pre}.l3.m{q2}"), format!("{name}.down"), net.budgets[4]));
            links.push(link(format!("{name}.down"), format!("{name}.s{}", p.l1_per_l2)));
        }
        let mut map: Vec<[u64; 3]> = (0..p.l2_quadrants)
            .map(|q2| [p.cluster_base(q2 * per_l2), p.cluster_base((q2 + 1) * per_l2), q2 as u64])
            .collect();
        map.push([HBM_BASE, HBM_BASE + HBM_SIZE, p.l2_quadrants as u64]);
        let mut budget = vec![net.budgets[4]; p.l2_quadrants];
        budget.push(net.budgets[5]);
        comps.push(crosspoint(format!("{pre}.l3"), net, p.l2_quadrants, map, None, budget, p.xbar_pipeline));
    }

    // Cores reach the wide HBM port through an upsizer; both networks share
    // the port through a multiplexer and one register stage.
    let hbm_id = p.dma_id_bits.max(p.core_id_bits) + 1;
    comps.push(ComponentConfig::Upsizer(UpsizerParams {
        name: "hbm.up".into(),
        narrow_bytes: p.core_bytes,
        wide_bytes: p.dma_bytes,
        id_bits: p.core_id_bits,
        read_slots: Some(4),
    }));
    comps.push(ComponentConfig::Mux(MuxParams {
        name: "hbm.mux".into(),
        slaves: 2,
        data_bytes: p.dma_bytes,
        id_bits: hbm_id - 1,
        pipeline: [false; 5],
    }));
    comps.push(cut("hbm.cut".into(), p.dma_bytes, hbm_id, [true; 5]));
    comps.push(ComponentConfig::Memory(MemoryParams {
        banks: 8,
        extra_latency: p.hbm_latency,
        ..memory("hbm".into(), MemKind::Duplex, p.dma_bytes, hbm_id, [HBM_BASE, HBM_BASE + HBM_SIZE])
    }));
    let hbm_port = p.l2_quadrants;
    links.push(budgeted(format!("dma.l3.m{hbm_port}"), "hbm.mux.s0", nets[0].budgets[5]));
    links.push(budgeted(format!("core.l3.m{hbm_port}"), "hbm.up", nets[1].budgets[5]));
    links.push(link("hbm.up", "hbm.mux.s1"));
    links.push(link("hbm.mux", "hbm.cut"));
    links.push(link("hbm.cut", "hbm"));

    let mut traffic = Vec::new();
    if p.traffic {
        let mut ranges: Vec<[u64; 2]> = (0..p.clusters()).map(|c| p.core_mem(c)).collect();
        ranges.push(p.hbm_core());
        traffic.push(TrafficConfig::Random(RandomTraffic {
            generators: (0..p.clusters()).map(|c| format!("c{c}.core")).collect(),
            ranges,
            read_fraction: 0.5,
            beats: [1, 4],
            narrow: true,
            unaligned: true,
            ids: None,
            rate: 0.5,
            limit: None,
            fixed_fraction: 0.0,
            partition: true,
        }));
        let mut src: Vec<[u64; 2]> = (0..p.clusters()).map(|c| p.l1_src(c)).collect();
        src.push(p.hbm_src());
        let mut dst: Vec<[u64; 2]> = (0..p.clusters()).map(|c| p.l1_dst(c)).collect();
        dst.push(p.hbm_dst());
        traffic.push(TrafficConfig::DmaTransfers(DmaTraffic {
            dmas: (0..p.clusters()).map(|c| format!("c{c}.dma")).collect(),
            count: p.dma_jobs,
            src,
            dst,
            len: [1, 2048],
        }));
    }

    TopologyConfig {
        meta: Meta {
            name: "manticore_mini".into(),
            clock_ghz: 1.0,
            watchdog: 10_000,
            monitor: true,
        },
        components: comps,
        links,
        traffic,
    }
}

fn index_bits(n: usize) -> u8 {
    n.max(1).next_power_of_two().trailing_zeros() as u8
}

pub const REGION: u64 = 0x1_0000;

/// `n` generators on an `n`x`n` crossbar in front of `n` duplex memories,
/// memory `m` at `m * REGION`. No traffic.
pub fn crossbar(n: usize, data_bytes: usize, pipeline: [bool; 5], mem: MemKind) -> TopologyConfig {
    let id_bits = 3;
    let mid = id_bits + index_bits(n);
    let mut comps = Vec::new();
    let mut links = Vec::new();
    comps.push(ComponentConfig::Crossbar(XbarParams {
        name: "xbar".into(),
        slaves: n,
        masters: n,
        data_bytes,
        id_bits,
        map: (0..n as u64).map(|m| [m * REGION, (m + 1) * REGION, m]).collect(),
        default_port: None,
        error_fallback: vec![],
        pipeline,
        disconnect: vec![],
        max_per_id: 8,
        budget: vec![],
    }));
    for i in 0..n {
        comps.push(ComponentConfig::Generator(generator(format!("g{i}"), data_bytes, id_bits)));
        links.push(link(format!("g{i}"), format!("xbar.s{i}")));
    }
    for m in 0..n {
        let range = [m as u64 * REGION, (m as u64 + 1) * REGION];
        let mut mc = memory(format!("mem{m}"), mem, data_bytes, mid, range);
        if mem == MemKind::Latency {
            mc.latency = Some([1, 12]);
        }
        comps.push(ComponentConfig::Memory(mc));
        links.push(link(format!("xbar.m{m}"), format!("mem{m}")));
    }
    TopologyConfig {
        meta: Meta {
            name: format!("crossbar{n}x{n}"),
            ..Meta::default()
        },
        components: comps,
        links,
        traffic: vec![],
    }
}

/// Components with a stand-alone bench.
pub const BENCHES: [&str; 13] = [
    "crossbar",
    "crosspoint",
    "mux",
    "cut",
    "remapper",
    "serializer",
    "upsizer",
    "downsizer",
    "dma",
    "simplex",
    "duplex",
    "latency",
    "llc",
];

const BENCH_SPAN: u64 = 0x4000;

fn random(gens: Vec<String>, ranges: Vec<[u64; 2]>) -> TrafficConfig {
    TrafficConfig::Random(RandomTraffic {
        generators: gens,
        ranges,
        read_fraction: 0.5,
        beats: [1, 16],
        narrow: true,
        unaligned: true,
        ids: None,
        rate: 1.0,
        limit: None,
        fixed_fraction: 0.0,
        partition: true,
    })
}

fn latency_mem(name: &str, data_bytes: usize, id_bits: u8, range: [u64; 2]) -> ComponentConfig {
    ComponentConfig::Memory(MemoryParams {
        latency: Some([1, 16]),
        ..memory(name.into(), MemKind::Latency, data_bytes, id_bits, range)
    })
}

fn slow_generator(name: &str, data_bytes: usize, id_bits: u8) -> ComponentConfig {
    ComponentConfig::Generator(GeneratorConfig {
        ready_prob: 0.7,
        random_strobes: true,
        ..generator(name.into(), data_bytes, id_bits)
    })
}

/// Random traffic through one component of kind `kind` (see [`BENCHES`]),
/// with back-pressure from the generators and reordering memories.
pub fn bench(kind: &str) -> Option<TopologyConfig> {
    let span = [0, BENCH_SPAN];
    let mut comps = Vec::new();
    let mut links = Vec::new();
    let mut traffic = Vec::new();
    let single = |comps: &mut Vec<ComponentConfig>, links: &mut Vec<LinkConfig>, dut: ComponentConfig, gi: (usize, u8), mo: (usize, u8)| {
        comps.push(slow_generator("g0", gi.0, gi.1));
        comps.push(dut);
        comps.push(latency_mem("mem", mo.0, mo.1, span));
        links.push(link("g0", "dut"));
        links.push(link("dut", "mem"));
    };
    match kind {
        "crossbar" | "crosspoint" => {
            let mut t = crossbar(4, 8, [true, false, true, false, true], MemKind::Latency);
            if kind == "crosspoint" {
                if let ComponentConfig::Crossbar(x) = &t.components[0] {
                    let mut x = x.clone();
                    x.budget = vec![[4, 4, 8]];
                    t.components[0] = ComponentConfig::Crosspoint(x);
                }
                for c in &mut t.components {
                    if let ComponentConfig::Memory(m) = c {
                        m.id_bits = 3;
                    }
                }
            }
            for c in &mut t.components {
                if let ComponentConfig::Generator(g) = c {
                    g.ready_prob = 0.7;
                    g.random_strobes = true;
                }
            }
            t.traffic.push(random(
                (0..4).map(|i| format!("g{i}")).collect(),
                (0..4).map(|m| [m * REGION, (m + 1) * REGION]).collect(),
            ));
            t.meta.name = kind.into();
            return Some(t);
        }
        "mux" => {
            for i in 0..3 {
                comps.push(slow_generator(&format!("g{i}"), 8, 3));
                links.push(link(format!("g{i}"), format!("dut.s{i}")));
            }
            comps.push(ComponentConfig::Mux(MuxParams {
                name: "dut".into(),
                slaves: 3,
                data_bytes: 8,
                id_bits: 3,
                pipeline: [false, true, false, true, false],
            }));
            comps.push(latency_mem("mem", 8, 5, span));
            links.push(link("dut", "mem"));
        }
        "cut" => single(
            &mut comps,
            &mut links,
            ComponentConfig::Cut(CutParams {
                name: "dut".into(),
                data_bytes: 8,
                id_bits: 3,
                flags: [true, false, true, true, false],
                stages: 3,
            }),
            (8, 3),
            (8, 3),
        ),
        "remapper" => single(
            &mut comps,
            &mut links,
            ComponentConfig::Remapper(RemapParams {
                name: "dut".into(),
                data_bytes: 8,
                in_bits: 4,
                out_bits: 2,
                unique: 4,
                per_id: 2,
                max_total: None,
            }),
            (8, 4),
            (8, 2),
        ),
        "serializer" => single(
            &mut comps,
            &mut links,
            ComponentConfig::Serializer(SerializerParams {
                name: "dut".into(),
                data_bytes: 8,
                in_bits: 4,
                out_bits: 1,
                depth: 4,
            }),
            (8, 4),
            (8, 1),
        ),
        "upsizer" => single(
            &mut comps,
            &mut links,
            ComponentConfig::Upsizer(UpsizerParams {
                name: "dut".into(),
                narrow_bytes: 8,
                wide_bytes: 64,
                id_bits: 3,
                read_slots: None,
            }),
            (8, 3),
            (64, 3),
        ),
        "downsizer" => single(
            &mut comps,
            &mut links,
            ComponentConfig::Downsizer(DownsizerParams {
                name: "dut".into(),
                wide_bytes: 64,
                narrow_bytes: 8,
                id_bits: 3,
            }),
            (64, 3),
            (8, 3),
        ),
        "simplex" | "duplex" | "latency" => {
            let k = match kind {
                "simplex" => MemKind::Simplex,
                "duplex" => MemKind::Duplex,
                _ => MemKind::Latency,
            };
            comps.push(slow_generator("g0", 8, 3));
            let mut m = memory("mem".into(), k, 8, 3, span);
            m.latency = (k == MemKind::Latency).then_some([1, 16]);
            m.extra_latency = if k == MemKind::Latency { 0 } else { 3 };
            comps.push(ComponentConfig::Memory(m));
            links.push(link("g0", "mem"));
        }
        "dma" => {
            comps.push(ComponentConfig::Dma(DmaParams {
                name: "dut".into(),
                data_bytes: 8,
                id_bits: 2,
                max_outstanding: 4,
                max_beats: 16,
                buffer_beats: 8,
            }));
            comps.push(ComponentConfig::Memory(memory("mem".into(), MemKind::Duplex, 8, 2, [0, 0x2_0000])));
            links.push(link("dut", "mem"));
            traffic.push(TrafficConfig::DmaTransfers(DmaTraffic {
                dmas: vec!["dut".into()],
                count: 20_000,
                src: vec![[0, 0x1_0000]],
                dst: vec![[0x1_0000, 0x2_0000]],
                len: [1, 600],
            }));
        }
        "llc" => {
            single(
                &mut comps,
                &mut links,
                ComponentConfig::Llc(LlcParams {
                    name: "dut".into(),
                    ways: 4,
                    lines: 16,
                    blocks_per_line: 8,
                    block_bytes: 8,
                    id_bits: 3,
                    spm_base: 0x10_0000,
                    spm_mask: 0b1000,
                    seed: 1,
                }),
                (8, 3),
                (8, 4),
            );
            // A third of the traffic goes to the scratchpad way.
            let spm = 0x10_0000 + 3 * 16 * 64;
            traffic.push(random(vec!["g0".into()], vec![span, [0, BENCH_SPAN / 2], [spm, spm + 16 * 64]]));
            return Some(TopologyConfig {
                meta: Meta {
                    name: kind.into(),
                    watchdog: 20_000,
                    ..Meta::default()
                },
                components: comps,
                links,
                traffic,
            });
        }
        _ => return None,
    }
    if traffic.is_empty() {
        let gens = comps
            .iter()
            .filter(|c| matches!(c, ComponentConfig::Generator(_)))
            .map(|c| c.name().to_string())
            .collect();
        traffic.push(random(gens, vec![span]));
    }
    Some(TopologyConfig {
        meta: Meta {
            name: kind.into(),
            ..Meta::default()
        },
        components: comps,
        links,
        traffic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn places_cover_the_tree() {
        let p = ManticoreParams::default();
        assert_eq!(p.clusters(), 32);
        assert_eq!(p.place(0), Place { l2: 0, l1: 0, k: 0 });
        assert_eq!(p.place(21), Place { l2: 1, l1: 1, k: 1 });
    }

    #[test]
    fn round_trip_stage_sums() {
        let p = ManticoreParams::default();
        assert_eq!(p.core_round_trip(0, 1), 8);
        assert_eq!(p.core_round_trip(0, 5), 16);
        assert_eq!(p.core_round_trip(0, 31), 24);
    }

    #[test]
    fn memory_windows_do_not_overlap() {
        let p = ManticoreParams::default();
        let mut all: Vec<[u64; 2]> = (0..32).flat_map(|c| [p.l1_mem(c), p.core_mem(c)]).collect();
        all.push([HBM_BASE, HBM_BASE + HBM_SIZE]);
        all.sort();
        assert!(all.windows(2).all(|w| w[0][1] <= w[1][0]));
    }

    #[test]
    fn every_bench_exists() {
        for k in BENCHES {
            assert!(bench(k).is_some(), "{k}");
        }
        assert!(bench("nope").is_none());
    }
}
