//! Turns a [`TopologyConfig`] into a runnable netlist.

use std::collections::HashMap;
use std::path::PathBuf;

use burstsim::dma::{Dma, DmaConfig, Job};
use burstsim::idconv::{RemapConfig, Remapper, Serializer, SerializerConfig};
use burstsim::initiator::{Initiator, InitiatorConfig, ScriptSource, TrafficSource};
use burstsim::junctions::{build_crosspoint, AddrMap, AddrRule, Fallback, Xbar, XbarConfig};
use burstsim::kernel::{CompId, Cut, Netlist, NetlistBuilder, PortRef, PortSpec};
use burstsim::llc::{CacheGeometry, Llc, LlcConfig};
use burstsim::memory::{Backdoor, DuplexMem, LatencyMem, MemConfig, MemInit, SimplexMem};
use burstsim::protocol::Budget;
use burstsim::widthconv::{Downsizer, DownsizerConfig, Upsizer, UpsizerConfig};

use crate::config::{ComponentConfig, MemKind, Meta, TopologyConfig, TrafficConfig, XbarParams};
use crate::error::HarnessError;
use crate::traffic;

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    pub seed: u64,
    /// Keep per-transaction records in every generator for the oracle.
    pub record: bool,
    /// Directory that relative trace files are resolved against.
    pub base_dir: Option<PathBuf>,
    /// Trace every link, not only the flagged ones.
    pub trace_all: bool,
}

#[derive(Debug, Clone)]
pub struct MemInfo {
    pub name: String,
    pub comp: CompId,
    pub kind: MemKind,
    pub base: u64,
    pub size: u64,
    pub init: MemInit,
}

#[derive(Debug, Clone)]
pub struct DmaInfo {
    pub name: String,
    pub comp: CompId,
    pub jobs: Vec<Job>,
}

/// A built netlist plus what the runner and the oracle need to know
/// about it.
pub struct Sim {
    pub net: Netlist,
    pub meta: Meta,
    pub generators: Vec<(String, CompId)>,
    pub dmas: Vec<DmaInfo>,
    pub memories: Vec<MemInfo>,
    pub llcs: Vec<(String, CompId)>,
}

enum Ports {
    Direct(CompId),
    Mapped { slaves: Vec<PortRef>, masters: Vec<PortRef> },
}

/// Splits `name.m3` into the name and the port; a bare name is port 0.
fn split_port(s: &str, side: char) -> (&str, Option<usize>) {
    if let Some((name, p)) = s.rsplit_once('.') {
        if let Some(n) = p.strip_prefix(side) {
            if let Ok(i) = n.parse() {
                return (name, Some(i));
            }
        }
    }
    (s, None)
}

/// Folds the run seed into a per-component seed.
pub fn mix_seed(seed: u64, k: u64) -> u64 {
    let mut x = seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn budget(b: [usize; 3]) -> Budget {
    Budget {
        unique_ids: b[0],
        per_id: b[1],
        total: b[2],
    }
}

fn xbar_config(p: &XbarParams) -> XbarConfig {
    let rules = p
        .map
        .iter()
        .map(|&[start, end, port]| AddrRule {
            start,
            end,
            port: port as usize,
        })
        .collect();
    let fallback = p.default_port.map_or(Fallback::ErrorSlave, Fallback::DefaultPort);
    let mut cfg = XbarConfig::new(p.slaves, p.masters, p.data_bytes, p.id_bits, AddrMap::new(rules, fallback))
        .with_pipeline(p.pipeline);
    for &s in &p.error_fallback {
        if s < p.slaves {
            cfg = cfg.with_fallback(s, Fallback::ErrorSlave);
        }
    }
    for &[s, m] in &p.disconnect {
        if s < p.slaves && m < p.masters {
            cfg = cfg.disconnect(s, m);
        }
    }
    cfg.max_per_id = p.max_per_id;
    cfg
}

fn mem_config(p: &crate::config::MemoryParams) -> MemConfig {
    let mut c = MemConfig::new(p.data_bytes, p.id_bits, p.base, p.size);
    c.banks = p.banks;
    c.extra_latency = p.extra_latency;
    c.resp_depth = p.resp_depth.unwrap_or((p.extra_latency as usize + 4).max(8));
    if let Some(d) = p.cmd_depth {
        c.cmd_depth = d;
    }
    c.init = p.init_pattern.map_or(MemInit::Zero, MemInit::Pattern);
    c
}

impl TopologyConfig {
    pub fn build(&self, opts: &BuildOptions) -> Result<Sim, HarnessError> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, c) in self.components.iter().enumerate() {
            if c.name().is_empty() {
                return Err(HarnessError::config(format!("component[{i}].name"), "empty name"));
            }
            if index.insert(c.name(), i).is_some() {
                return Err(HarnessError::config(
                    format!("component[{i}].name"),
                    format!("duplicate component {}", c.name()),
                ));
            }
        }

        let mut sources: HashMap<usize, Box<dyn TrafficSource>> = HashMap::new();
        let mut jobs: HashMap<usize, Vec<Job>> = HashMap::new();
        let lookup = |path: String, name: &str, want: &str| -> Result<usize, HarnessError> {
            let i = *index
                .get(name)
                .ok_or_else(|| HarnessError::config(&path, format!("unknown component {name}")))?;
            if self.components[i].type_name() != want {
                return Err(HarnessError::config(&path, format!("{name} is not a {want}")));
            }
            Ok(i)
        };
        for (j, t) in self.traffic.iter().enumerate() {
            match t {
                TrafficConfig::Random(_) | TrafficConfig::Sequential(_) | TrafficConfig::Permutation(_) => {
                    let gens = match t {
                        TrafficConfig::Random(r) => &r.generators,
                        TrafficConfig::Sequential(s) => &s.generators,
                        TrafficConfig::Permutation(p) => &p.generators,
                        _ => unreachable!(),
                    };
                    for (k, g) in gens.iter().enumerate() {
                        let path = format!("traffic[{j}].generators[{k}]");
                        let i = lookup(path.clone(), g, "generator")?;
                        let ComponentConfig::Generator(gc) = &self.components[i] else { unreachable!() };
                        let src: Box<dyn TrafficSource> = match t {
                            TrafficConfig::Random(r) => {
                                if r.ranges.is_empty() || r.ranges.iter().any(|r| r[1] <= r[0]) {
                                    return Err(HarnessError::config(format!("traffic[{j}].ranges"), "empty range"));
                                }
                                if r.beats[0] > r.beats[1] || r.beats[1] > 256 {
                                    return Err(HarnessError::config(format!("traffic[{j}].beats"), "must be 1..=256"));
                                }
                                Box::new(traffic::random_source(r, k, gens.len(), gc.data_bytes, gc.id_bits))
                            }
                            TrafficConfig::Sequential(s) => {
                                let range = traffic::slice(s.range, k, gens.len(), gc.data_bytes as u64);
                                Box::new(traffic::StreamSource::new(
                                    range,
                                    gc.data_bytes,
                                    s.beats,
                                    s.dir,
                                    s.ids,
                                    s.rate,
                                ))
                            }
                            TrafficConfig::Permutation(p) => {
                                if p.targets.is_empty() {
                                    return Err(HarnessError::config(format!("traffic[{j}].targets"), "no targets"));
                                }
                                let range = p.targets[(k + p.shift) % p.targets.len()];
                                Box::new(traffic::StreamSource::new(range, gc.data_bytes, p.beats, p.dir, p.ids, 1.0))
                            }
                            _ => unreachable!(),
                        };
                        if sources.insert(i, src).is_some() {
                            return Err(HarnessError::config(path, format!("{g} already has traffic")));
                        }
                    }
                }
                TrafficConfig::DmaTransfers(d) => {
                    if d.src.is_empty() || d.dst.is_empty() {
                        return Err(HarnessError::config(format!("traffic[{j}]"), "needs src and dst ranges"));
                    }
                    for (k, name) in d.dmas.iter().enumerate() {
                        let i = lookup(format!("traffic[{j}].dmas[{k}]"), name, "dma")?;
                        let ComponentConfig::Dma(dc) = &self.components[i] else { unreachable!() };
                        let seed = mix_seed(opts.seed, 0x1_0000 + i as u64);
                        jobs.entry(i).or_default().extend(traffic::dma_jobs(
                            d,
                            k,
                            d.dmas.len(),
                            dc.data_bytes as u64,
                            seed,
                        ));
                    }
                }
                TrafficConfig::TraceReplay(tr) => {
                    let i = lookup(format!("traffic[{j}].dma"), &tr.dma, "dma")?;
                    let list = traffic::load_trace(opts.base_dir.as_deref(), &tr.file, &format!("traffic[{j}].file"))?;
                    jobs.entry(i).or_default().extend(list);
                }
            }
        }

        let mut b = NetlistBuilder::new();
        let mut ports: Vec<Ports> = Vec::with_capacity(self.components.len());
        let mut sim_gens = Vec::new();
        let mut sim_dmas = Vec::new();
        let mut memories = Vec::new();
        let mut llcs = Vec::new();
        for (i, c) in self.components.iter().enumerate() {
            let path = format!("component[{i}]");
            let err = |e| HarnessError::netlist(format!("{path} ({})", c.name()), e);
            let name = c.name().to_string();
            let p = match c {
                ComponentConfig::Generator(g) => {
                    let mut cfg = InitiatorConfig::new(g.data_bytes, g.id_bits);
                    cfg.max_outstanding = g.max_outstanding;
                    cfg.max_per_id = g.max_per_id;
                    cfg.ready_prob = g.ready_prob;
                    cfg.random_strobes = g.random_strobes;
                    cfg.record = opts.record;
                    cfg.seed = mix_seed(opts.seed, i as u64);
                    let src = sources.remove(&i).unwrap_or_else(|| Box::new(ScriptSource::default()));
                    let init = Initiator::new(cfg, src).map_err(err)?.with_tag_base((i as u64 + 1) << 40);
                    let id = b.add(name.clone(), init);
                    sim_gens.push((name, id));
                    Ports::Direct(id)
                }
                ComponentConfig::Crossbar(x) => {
                    if !x.budget.is_empty() {
                        return Err(HarnessError::config(format!("{path}.budget"), "only crosspoints take budgets"));
                    }
                    Ports::Direct(b.add(name, Xbar::new(xbar_config(x)).map_err(err)?))
                }
                ComponentConfig::Crosspoint(x) => {
                    if x.budget.is_empty() {
                        return Err(HarnessError::config(format!("{path}.budget"), "crosspoint needs a remap budget"));
                    }
                    let budgets: Vec<Budget> = x.budget.iter().map(|&v| budget(v)).collect();
                    let xp = build_crosspoint(&mut b, &name, xbar_config(x), &budgets).map_err(err)?;
                    Ports::Mapped {
                        slaves: xp.slaves,
                        masters: xp.masters,
                    }
                }
                ComponentConfig::Mux(m) => {
                    let cfg = XbarConfig::new(m.slaves, 1, m.data_bytes, m.id_bits, AddrMap::single(0))
                        .with_pipeline(m.pipeline);
                    Ports::Direct(b.add(name, Xbar::new(cfg).map_err(err)?))
                }
                ComponentConfig::Cut(cp) => {
                    if cp.stages == 0 {
                        return Err(HarnessError::config(format!("{path}.stages"), "at least one stage"));
                    }
                    let spec = PortSpec::new(cp.data_bytes, cp.id_bits);
                    if cp.stages == 1 {
                        Ports::Direct(b.add(name, Cut::new(spec, cp.flags)))
                    } else {
                        let ids: Vec<CompId> = (0..cp.stages)
                            .map(|k| b.add(format!("{name}.{k}"), Cut::new(spec, cp.flags)))
                            .collect();
                        for w in ids.windows(2) {
                            b.connect(w[0].m(0), w[1].s(0)).map_err(err)?;
                        }
                        Ports::Mapped {
                            slaves: vec![ids[0].s(0)],
                            masters: vec![ids[cp.stages - 1].m(0)],
                        }
                    }
                }
                ComponentConfig::Remapper(r) => {
                    let mut cfg = RemapConfig::new(r.data_bytes, r.in_bits, r.out_bits, r.unique, r.per_id);
                    if let Some(t) = r.max_total {
                        cfg.max_total = t;
                    }
                    Ports::Direct(b.add(name, Remapper::new(cfg).map_err(err)?))
                }
                ComponentConfig::Serializer(s) => {
                    let cfg = SerializerConfig {
                        data_bytes: s.data_bytes,
                        in_bits: s.in_bits,
                        out_bits: s.out_bits,
                        depth: s.depth,
                    };
                    Ports::Direct(b.add(name, Serializer::new(cfg).map_err(err)?))
                }
                ComponentConfig::Upsizer(u) => {
                    let mut cfg = UpsizerConfig::new(u.narrow_bytes, u.wide_bytes, u.id_bits);
                    if let Some(s) = u.read_slots {
                        cfg.read_slots = s;
                    }
                    Ports::Direct(b.add(name, Upsizer::new(cfg).map_err(err)?))
                }
                ComponentConfig::Downsizer(d) => {
                    let cfg = DownsizerConfig::new(d.wide_bytes, d.narrow_bytes, d.id_bits);
                    Ports::Direct(b.add(name, Downsizer::new(cfg).map_err(err)?))
                }
                ComponentConfig::Dma(d) => {
                    let mut cfg = DmaConfig::new(d.data_bytes, d.id_bits);
                    cfg.max_outstanding = d.max_outstanding;
                    cfg.max_beats = d.max_beats;
                    cfg.buffer_beats = d.buffer_beats;
                    let mut dma = Dma::new(cfg).map_err(err)?;
                    let list = jobs.remove(&i).unwrap_or_default();
                    for &j in &list {
                        dma.submit(j);
                    }
                    let id = b.add(name.clone(), dma);
                    sim_dmas.push(DmaInfo {
                        name,
                        comp: id,
                        jobs: list,
                    });
                    Ports::Direct(id)
                }
                ComponentConfig::Memory(m) => {
                    let cfg = mem_config(m);
                    let init = cfg.init;
                    let id = match m.kind {
                        MemKind::Simplex => b.add(name.clone(), SimplexMem::new(cfg).map_err(err)?),
                        MemKind::Duplex => b.add(name.clone(), DuplexMem::new(cfg).map_err(err)?),
                        MemKind::Latency => {
                            let [lo, hi] = m.latency.ok_or_else(|| {
                                HarnessError::config(format!("{path}.latency"), "latency memory needs [min, max]")
                            })?;
                            let seed = mix_seed(opts.seed, i as u64);
                            b.add(
                                name.clone(),
                                LatencyMem::new(cfg, (lo, hi), m.max_outstanding, seed).map_err(err)?,
                            )
                        }
                    };
                    memories.push(MemInfo {
                        name,
                        comp: id,
                        kind: m.kind,
                        base: m.base,
                        size: m.size,
                        init,
                    });
                    Ports::Direct(id)
                }
                ComponentConfig::Llc(l) => {
                    let geom = CacheGeometry::new(l.ways, l.lines, l.blocks_per_line, l.block_bytes);
                    let mut cfg = LlcConfig::new(geom, l.id_bits, l.spm_base);
                    cfg.spm_mask = l.spm_mask;
                    cfg.seed = l.seed;
                    let id = b.add(name.clone(), Llc::new(cfg).map_err(err)?);
                    llcs.push((name, id));
                    Ports::Direct(id)
                }
            };
            ports.push(p);
        }

        let resolve = |path: &str, s: &str, side: char| -> Result<PortRef, HarnessError> {
            let (name, port) = split_port(s, side);
            let i = *index
                .get(name)
                .ok_or_else(|| HarnessError::config(path, format!("unknown component {name}")))?;
            let k = port.unwrap_or(0);
            match &ports[i] {
                Ports::Direct(id) => Ok(if side == 'm' { id.m(k) } else { id.s(k) }),
                Ports::Mapped { slaves, masters } => {
                    let list = if side == 'm' { masters } else { slaves };
                    list.get(k)
                        .copied()
                        .ok_or_else(|| HarnessError::config(path, format!("{name} has no port {side}{k}")))
                }
            }
        };
        let mut any_trace = false;
        for (j, l) in self.links.iter().enumerate() {
            let from = resolve(&format!("link[{j}].from"), &l.from, 'm')?;
            let to = resolve(&format!("link[{j}].to"), &l.to, 's')?;
            let id = b.connect(from, to).map_err(|e| HarnessError::netlist(format!("link[{j}]"), e))?;
            if l.budget.is_some() || l.monitor.unwrap_or(self.meta.monitor) {
                b.monitor(id, l.budget.map(budget));
            }
            if l.trace {
                b.trace(id);
                any_trace = true;
            }
        }
        if opts.trace_all && !any_trace {
            let all: Vec<_> = b.links().map(|(l, _)| l).collect();
            for l in all {
                b.trace(l);
            }
        }
        let net = b.build().map_err(|e| HarnessError::netlist("topology", e))?;
        Ok(Sim {
            net,
            meta: self.meta.clone(),
            generators: sim_gens,
            dmas: sim_dmas,
            memories,
            llcs,
        })
    }
}

impl Sim {
    fn memory_at(&self, addr: u64) -> Option<&MemInfo> {
        self.memories.iter().find(|m| addr >= m.base && addr - m.base < m.size)
    }

    fn backdoor(&self, m: &MemInfo) -> &dyn Backdoor {
        match m.kind {
            MemKind::Simplex => self.net.component::<SimplexMem>(m.comp).unwrap(),
            MemKind::Duplex => self.net.component::<DuplexMem>(m.comp).unwrap(),
            MemKind::Latency => self.net.component::<LatencyMem>(m.comp).unwrap(),
        }
    }

    fn backdoor_mut(&mut self, m: &MemInfo) -> &mut dyn Backdoor {
        match m.kind {
            MemKind::Simplex => self.net.component_mut::<SimplexMem>(m.comp).unwrap(),
            MemKind::Duplex => self.net.component_mut::<DuplexMem>(m.comp).unwrap(),
            MemKind::Latency => self.net.component_mut::<LatencyMem>(m.comp).unwrap(),
        }
    }

    /// Scratchpad byte of a cache if `addr` lies in one of its scratchpad
    /// ways.
    fn spm(&self, addr: u64) -> Option<u8> {
        self.llcs.iter().find_map(|&(_, id)| {
            let llc = self.net.component::<Llc>(id)?;
            let cfg = llc.config();
            let off = addr.checked_sub(cfg.spm_base)?;
            let way = off / cfg.geom.way_bytes();
            (way < cfg.geom.ways as u64 && llc.spm_mask() >> way & 1 == 1)
                .then(|| llc.peek_spm(addr))
                .flatten()
        })
    }

    /// Contents of `addr` before any traffic.
    pub fn init_byte(&self, addr: u64) -> u8 {
        if self.spm(addr).is_some() {
            return 0;
        }
        self.memory_at(addr).map_or(0, |m| m.init.byte(addr))
    }

    /// Current contents of `addr`, bypassing caches that were not flushed.
    pub fn peek(&self, addr: u64) -> Option<u8> {
        if let Some(v) = self.spm(addr) {
            return Some(v);
        }
        let m = self.memory_at(addr)?;
        Some(self.backdoor(m).peek_byte(addr))
    }

    /// Flips one bit of a memory. Returns false if no memory holds `addr`.
    pub fn flip_bit(&mut self, addr: u64, bit: u8) -> bool {
        match self.memory_at(addr).cloned() {
            Some(m) => {
                self.backdoor_mut(&m).flip_bit(addr, bit);
                true
            }
            None => false,
        }
    }

    pub fn flush_caches(&mut self) {
        for &(_, id) in &self.llcs {
            self.net.component_mut::<Llc>(id).unwrap().flush();
        }
    }

    pub fn initiator(&self, name: &str) -> Option<&Initiator> {
        let &(_, id) = self.generators.iter().find(|(n, _)| n == name)?;
        self.net.component(id)
    }

    pub fn dma(&self, name: &str) -> Option<&Dma> {
        let d = self.dmas.iter().find(|d| d.name == name)?;
        self.net.component(d.comp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn port_names() {
        assert_eq!(split_port("x.m3", 'm'), ("x", Some(3)));
        assert_eq!(split_port("x.s3", 'm'), ("x.s3", None));
        assert_eq!(split_port("cl0.dma", 'm'), ("cl0.dma", None));
        assert_eq!(split_port("cl0.dma.m1", 'm'), ("cl0.dma", Some(1)));
    }

    #[test]
    fn seeds_differ_per_component() {
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(1, 0), mix_seed(2, 0));
        assert_eq!(mix_seed(7, 3), mix_seed(7, 3));
    }
}
