//! Non-coherent set-associative write-back cache with write allocation,
//! pseudo-random eviction, per-way scratchpad reconfiguration and a bypass
//! for non-cacheable traffic.
//!
//! Commands are split into descriptors that each cover one cache line. A
//! shared lookup stage resolves hits and misses; misses pass through the
//! eviction and refill units before reaching the read or write unit, hits
//! go straight there. Write data is collected while splitting, so the
//! lookup knows whether a write miss covers its whole line.

use std::collections::{HashMap, VecDeque};
use std::ops::Range;

use bytes::Bytes;

use crate::kernel::{Chan, CombPath, Component, Ctx, Io, PortSpec, Side, Signal};
use crate::protocol::{beat_slot, lane_mask, Command, DataBeat, Dir, Resp, ResponseBeat, Rule, TransactionId, MAX_DATA_BYTES};
use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheGeometry {
    pub ways: usize,
    /// Cache lines per way.
    pub lines: usize,
    pub blocks_per_line: usize,
    pub block_bytes: usize,
}

impl CacheGeometry {
    pub fn new(ways: usize, lines: usize, blocks_per_line: usize, block_bytes: usize) -> Self {
        Self {
            ways,
            lines,
            blocks_per_line,
            block_bytes,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let ok = |v: usize| v.is_power_of_two();
        if !(ok(self.ways) && ok(self.lines) && ok(self.blocks_per_line) && ok(self.block_bytes)) {
            return Err(ConfigError::invalid("cache geometry values must be powers of two"));
        }
        if self.ways > 64 || self.block_bytes > MAX_DATA_BYTES {
            return Err(ConfigError::invalid("at most 64 ways and 128-byte blocks"));
        }
        Ok(())
    }

    pub fn line_bytes(&self) -> u64 {
        (self.blocks_per_line * self.block_bytes) as u64
    }

    pub fn way_bytes(&self) -> u64 {
        self.line_bytes() * self.lines as u64
    }

    pub fn capacity(&self) -> u64 {
        self.way_bytes() * self.ways as u64
    }

    pub fn index(&self, addr: u64) -> usize {
        ((addr / self.line_bytes()) % self.lines as u64) as usize
    }

    pub fn tag(&self, addr: u64) -> u64 {
        addr / self.way_bytes()
    }

    pub fn line_addr(&self, addr: u64) -> u64 {
        addr - addr % self.line_bytes()
    }
}

/// The part of a command that falls into one cache line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Descriptor {
    pub cmd: Command,
    pub line: u64,
    /// Beat indices of `cmd` inside the line.
    pub beats: Range<usize>,
    pub first: bool,
    pub last: bool,
}

/// Splits a command into per-line descriptors, in address order.
pub fn split_command(cmd: &Command, geom: &CacheGeometry) -> Vec<Descriptor> {
    let mut out: Vec<Descriptor> = Vec::new();
    for k in 0..cmd.beats() {
        let line = geom.line_addr(cmd.beat_addr(k));
        match out.last_mut() {
            Some(d) if d.line == line => d.beats.end = k + 1,
            _ => out.push(Descriptor {
                cmd: *cmd,
                line,
                beats: k..k + 1,
                first: out.is_empty(),
                last: false,
            }),
        }
    }
    if let Some(d) = out.last_mut() {
        d.last = true;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TagEntry {
    pub valid: bool,
    pub dirty: bool,
    pub tag: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Hit { way: usize },
    /// `evict` is the address of a dirty victim line.
    Miss { way: usize, evict: Option<u64> },
    /// Every way is a scratchpad.
    NoWay,
}

#[derive(Debug, Clone)]
pub struct TagState {
    geom: CacheGeometry,
    entries: Vec<TagEntry>,
    /// One 16-bit LFSR per line index, stepped on each allocation.
    lfsr: Vec<u16>,
    spm: u64,
}

impl TagState {
    pub fn new(geom: CacheGeometry, seed: u64) -> Self {
        let lfsr = (0..geom.lines)
            .map(|i| {
                let s = (seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)) as u16;
                if s == 0 {
                    0xACE1
                } else {
                    s
                }
            })
            .collect();
        Self {
            geom,
            entries: vec![TagEntry::default(); geom.ways * geom.lines],
            lfsr,
            spm: 0,
        }
    }

    pub fn entry(&self, way: usize, index: usize) -> TagEntry {
        self.entries[way * self.geom.lines + index]
    }

    fn entry_mut(&mut self, way: usize, index: usize) -> &mut TagEntry {
        &mut self.entries[way * self.geom.lines + index]
    }

    pub fn spm_mask(&self) -> u64 {
        self.spm
    }

    fn cache_ways(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.geom.ways).filter(move |w| self.spm >> w & 1 == 0)
    }

    /// Hit way, or the victim for a miss: the first invalid way, else the
    /// way picked by the line's LFSR.
    pub fn lookup(&self, addr: u64) -> Lookup {
        let index = self.geom.index(addr);
        let tag = self.geom.tag(addr);
        if let Some(way) = self.cache_ways().find(|&w| {
            let e = self.entry(w, index);
            e.valid && e.tag == tag
        }) {
            return Lookup::Hit { way };
        }
        let ways: Vec<usize> = self.cache_ways().collect();
        if ways.is_empty() {
            return Lookup::NoWay;
        }
        let way = ways
            .iter()
            .copied()
            .find(|&w| !self.entry(w, index).valid)
            .unwrap_or_else(|| ways[self.lfsr[index] as usize % ways.len()]);
        let e = self.entry(way, index);
        let evict = (e.valid && e.dirty).then(|| self.victim_addr(way, index));
        Lookup::Miss { way, evict }
    }

    fn victim_addr(&self, way: usize, index: usize) -> u64 {
        self.entry(way, index).tag * self.geom.way_bytes() + index as u64 * self.geom.line_bytes()
    }

    /// Installs `addr` in `way` after a miss.
    pub fn allocate(&mut self, addr: u64, way: usize, dirty: bool) {
        let index = self.geom.index(addr);
        let tag = self.geom.tag(addr);
        *self.entry_mut(way, index) = TagEntry { valid: true, dirty, tag };
        let l = &mut self.lfsr[index];
        let bit = (*l ^ (*l >> 2) ^ (*l >> 3) ^ (*l >> 5)) & 1;
        *l = (*l >> 1) | (bit << 15);
    }

    pub fn touch(&mut self, way: usize, index: usize, dirty: bool) {
        self.entry_mut(way, index).dirty |= dirty;
    }

    pub fn invalidate(&mut self, way: usize, index: usize) {
        *self.entry_mut(way, index) = TagEntry::default();
    }
}

/// A hit may enter the data units only when no descriptor with the same ID
/// is in the miss pipeline.
pub fn admit_hit(miss_counts: &[u16], id: TransactionId) -> bool {
    miss_counts[id.value() as usize] == 0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LlcConfig {
    pub geom: CacheGeometry,
    pub id_bits: u8,
    /// Start of the scratchpad window; way `w` maps to
    /// `spm_base + w * way_bytes`.
    pub spm_base: u64,
    /// One bit per way; set ways are scratchpad.
    pub spm_mask: u64,
    pub seed: u64,
    pub queue_depth: usize,
}

impl LlcConfig {
    pub fn new(geom: CacheGeometry, id_bits: u8, spm_base: u64) -> Self {
        Self {
            geom,
            id_bits,
            spm_base,
            spm_mask: 0,
            seed: 1,
            queue_depth: 2,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.geom.validate()?;
        if self.id_bits > 16 {
            return Err(ConfigError::invalid("cache supports at most 16 ID bits"));
        }
        if self.geom.ways < 64 && self.spm_mask >> self.geom.ways != 0 {
            return Err(ConfigError::invalid("scratchpad mask names a way that does not exist"));
        }
        if !self.spm_base.is_multiple_of(self.geom.way_bytes()) {
            return Err(ConfigError::invalid("scratchpad base must be aligned to the way size"));
        }
        if self.queue_depth == 0 {
            return Err(ConfigError::invalid("queue depth must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LlcStats {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub refills: u64,
    pub spm: u64,
    pub bypassed: u64,
    pub flushed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Path {
    Core,
    Bypass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Cache,
    Spm,
    Error,
    Flush,
}

#[derive(Debug, Clone)]
struct Desc {
    seq: u64,
    cmd_no: u64,
    d: Descriptor,
    kind: Kind,
    way: usize,
    index: usize,
    evict: Option<u64>,
    refill: bool,
    wdata: Vec<DataBeat>,
    resp: Resp,
}

#[derive(Debug)]
struct Split {
    cmd_no: u64,
    seq: u64,
    descs: VecDeque<Descriptor>,
    wdata: Vec<DataBeat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Drain,
    Flush,
}

#[derive(Debug)]
struct Reconfig {
    mask: u64,
    /// Ways whose lines are written back and invalidated.
    flush_ways: u64,
    phase: Phase,
}

#[derive(Debug)]
struct EvictUnit {
    desc: Desc,
    aw: bool,
    sent: usize,
}

#[derive(Debug)]
struct RefillUnit {
    desc: Desc,
    ar: bool,
    recv: usize,
}

pub struct Llc {
    cfg: LlcConfig,
    mid_bits: u8,
    tags: TagState,
    data: Vec<u8>,
    locks: Vec<bool>,
    seq: u64,
    cmd_no: u64,

    cmd_q: [VecDeque<(Command, Path, u64)>; 2],
    aw_seq: u64,
    w_route: VecDeque<(Path, u64)>,
    core_out: [Vec<u16>; 2],
    byp_out: [Vec<u16>; 2],
    split: [Option<Split>; 2],
    desc_q: [VecDeque<Desc>; 2],
    lookup_rr: usize,
    flush_q: VecDeque<Desc>,
    flush_left: usize,
    reconfig: Option<Reconfig>,
    /// A request made while a flush was running.
    queued: Option<(u64, u64)>,

    hit_q: [VecDeque<Desc>; 2],
    miss_count: [Vec<u16>; 2],
    evict_q: VecDeque<Desc>,
    evict: Option<EvictUnit>,
    refill_q: VecDeque<Desc>,
    refill: Option<RefillUnit>,
    miss_out: [VecDeque<Desc>; 2],
    /// Victim lines written back and not yet acknowledged, in order.
    evicting: VecDeque<u64>,

    read: Option<(Desc, usize)>,
    write: Option<(Desc, usize)>,
    w_resp: HashMap<u64, Resp>,
    b_q: VecDeque<ResponseBeat>,
    r_out: Option<(ResponseBeat, Path)>,
    b_out: Option<(ResponseBeat, Path)>,
    r_rr: bool,
    b_rr: bool,

    byp_ar: VecDeque<Command>,
    byp_aw: VecDeque<(Command, u64)>,
    bw_buf: VecDeque<DataBeat>,
    br_buf: VecDeque<ResponseBeat>,
    bb_buf: VecDeque<ResponseBeat>,
    m_ar: Option<(Command, Path)>,
    m_aw: Option<(Command, Path)>,
    ar_rr: bool,
    aw_rr: bool,
    /// Write bursts in master command order, with whether the command fired.
    mw_order: VecDeque<(Path, bool)>,

    stats: LlcStats,
}

impl Llc {
    pub fn new(cfg: LlcConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let g = cfg.geom;
        let n = 1usize << cfg.id_bits;
        let mut tags = TagState::new(g, cfg.seed);
        tags.spm = cfg.spm_mask;
        Ok(Self {
            cfg,
            mid_bits: cfg.id_bits + 1,
            tags,
            data: vec![0; g.capacity() as usize],
            locks: vec![false; g.ways * g.lines],
            seq: 0,
            cmd_no: 0,
            cmd_q: Default::default(),
            aw_seq: 0,
            w_route: VecDeque::new(),
            core_out: [vec![0; n], vec![0; n]],
            byp_out: [vec![0; n], vec![0; n]],
            split: [None, None],
            desc_q: Default::default(),
            lookup_rr: 0,
            flush_q: VecDeque::new(),
            flush_left: 0,
            reconfig: None,
            queued: None,
            hit_q: Default::default(),
            miss_count: [vec![0; n], vec![0; n]],
            evict_q: VecDeque::new(),
            evict: None,
            refill_q: VecDeque::new(),
            refill: None,
            miss_out: Default::default(),
            evicting: VecDeque::new(),
            read: None,
            write: None,
            w_resp: HashMap::new(),
            b_q: VecDeque::new(),
            r_out: None,
            b_out: None,
            r_rr: false,
            b_rr: false,
            byp_ar: VecDeque::new(),
            byp_aw: VecDeque::new(),
            bw_buf: VecDeque::new(),
            br_buf: VecDeque::new(),
            bb_buf: VecDeque::new(),
            m_ar: None,
            m_aw: None,
            ar_rr: false,
            aw_rr: false,
            mw_order: VecDeque::new(),
            stats: LlcStats::default(),
        })
    }

    pub fn config(&self) -> &LlcConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &LlcStats {
        &self.stats
    }

    pub fn tags(&self) -> &TagState {
        &self.tags
    }

    pub fn spm_mask(&self) -> u64 {
        self.tags.spm
    }

    /// Locked (way, index) pairs.
    pub fn locks(&self) -> Vec<(usize, usize)> {
        let l = self.cfg.geom.lines;
        (0..self.locks.len()).filter(|&i| self.locks[i]).map(|i| (i / l, i % l)).collect()
    }

    pub fn reconfiguring(&self) -> bool {
        self.reconfig.is_some()
    }

    /// Turns the masked ways into scratchpad once in-flight descriptors
    /// have drained and dirty lines of those ways have been written back.
    pub fn configure_spm(&mut self, mask: u64) {
        let flush_ways = mask & !self.target_mask();
        self.schedule(mask, flush_ways);
    }

    /// Writes back and invalidates every cache line.
    pub fn flush(&mut self) {
        let mask = self.target_mask();
        self.schedule(mask, !mask);
    }

    fn target_mask(&self) -> u64 {
        match (&self.queued, &self.reconfig) {
            (Some(q), _) => q.0,
            (None, Some(r)) => r.mask,
            (None, None) => self.tags.spm,
        }
    }

    fn schedule(&mut self, mask: u64, flush_ways: u64) {
        match &mut self.reconfig {
            None => {
                self.reconfig = Some(Reconfig {
                    mask,
                    flush_ways,
                    phase: Phase::Drain,
                })
            }
            Some(r) if r.phase == Phase::Drain => {
                r.mask = mask;
                r.flush_ways |= flush_ways;
            }
            Some(_) => {
                let prev = self.queued.map_or(0, |q| q.1);
                self.queued = Some((mask, prev | flush_ways));
            }
        }
    }

    /// Data byte at `addr` of the scratchpad window.
    pub fn peek_spm(&self, addr: u64) -> Option<u8> {
        let off = addr.checked_sub(self.cfg.spm_base)?;
        (off < self.cfg.geom.capacity()).then(|| self.data[off as usize])
    }

    fn lock_index(&self, way: usize, index: usize) -> usize {
        way * self.cfg.geom.lines + index
    }

    fn line_offset(&self, way: usize, index: usize) -> usize {
        self.lock_index(way, index) * self.cfg.geom.line_bytes() as usize
    }

    fn spm_way(&self, addr: u64) -> Option<usize> {
        let off = addr.checked_sub(self.cfg.spm_base)?;
        (off < self.cfg.geom.capacity()).then(|| (off / self.cfg.geom.way_bytes()) as usize)
    }

    fn classify(&self, cmd: &Command) -> Path {
        let spm = self.spm_way(cmd.addr).is_some() || self.spm_way(cmd.end_addr() - 1).is_some();
        if spm {
            return Path::Core;
        }
        let all_spm = self.cfg.geom.ways == 64 && self.tags.spm == u64::MAX
            || self.cfg.geom.ways < 64 && self.tags.spm == (1u64 << self.cfg.geom.ways) - 1;
        if cmd.attrs.modifiable && !all_spm {
            Path::Core
        } else {
            Path::Bypass
        }
    }

    fn make_desc(&mut self, d: Descriptor, cmd_no: u64, wdata: Vec<DataBeat>) -> Desc {
        let g = self.cfg.geom;
        let (kind, way, index) = match self.spm_way(d.line) {
            Some(w) if self.tags.spm >> w & 1 == 1 => (Kind::Spm, w, g.index(d.line - self.cfg.spm_base)),
            Some(_) => (Kind::Error, 0, 0),
            None => (Kind::Cache, 0, g.index(d.line)),
        };
        self.seq += 1;
        Desc {
            seq: self.seq,
            cmd_no,
            d,
            kind,
            way,
            index,
            evict: None,
            refill: false,
            wdata,
            resp: Resp::Okay,
        }
    }

    fn full_coverage(&self, desc: &Desc) -> bool {
        let g = self.cfg.geom;
        let bb = g.block_bytes;
        let mut cover = vec![0u128; g.blocks_per_line];
        for (i, k) in desc.d.beats.clone().enumerate() {
            let slot = beat_slot(&desc.d.cmd, k, bb);
            let block = ((slot.addr - desc.d.line) / bb as u64) as usize;
            cover[block] |= lane_mask(slot.lanes) & desc.wdata[i].strb;
        }
        cover.iter().all(|&c| c == lane_mask(0..bb))
    }

    /// Moves one descriptor from the splitters or the flush queue into the
    /// hit path or the miss pipeline.
    fn lookup_stage(&mut self) {
        let depth = self.cfg.queue_depth;
        if self.reconfig.as_ref().is_some_and(|r| r.phase == Phase::Flush) {
            if let Some(f) = self.flush_q.front() {
                let li = self.lock_index(f.way, f.index);
                if self.locks[li] || self.evict_q.len() >= depth {
                    return;
                }
                let mut f = self.flush_q.pop_front().unwrap();
                let e = self.tags.entry(f.way, f.index);
                self.tags.invalidate(f.way, f.index);
                if e.valid && e.dirty {
                    f.evict = Some(e.tag * self.cfg.geom.way_bytes() + f.index as u64 * self.cfg.geom.line_bytes());
                    self.locks[li] = true;
                    self.stats.flushed += 1;
                    self.evict_q.push_back(f);
                } else {
                    self.flush_left -= 1;
                }
            }
            return;
        }
        for n in 0..2 {
            let di = (self.lookup_rr + n) % 2;
            if self.try_lookup(di) {
                self.lookup_rr = (di + 1) % 2;
                return;
            }
        }
    }

    fn try_lookup(&mut self, di: usize) -> bool {
        let depth = self.cfg.queue_depth;
        let Some(desc) = self.desc_q[di].front() else {
            return false;
        };
        let id = desc.d.cmd.id;
        let write = di == Dir::Write.index();
        match desc.kind {
            Kind::Error | Kind::Spm => {
                let locked = desc.kind == Kind::Spm && self.locks[self.lock_index(desc.way, desc.index)];
                if locked || !admit_hit(&self.miss_count[di], id) || self.hit_q[di].len() >= depth {
                    return false;
                }
                let desc = self.desc_q[di].pop_front().unwrap();
                if desc.kind == Kind::Spm {
                    let li = self.lock_index(desc.way, desc.index);
                    self.locks[li] = true;
                    self.stats.spm += 1;
                }
                self.hit_q[di].push_back(desc);
                true
            }
            Kind::Cache => match self.tags.lookup(desc.d.line) {
                Lookup::Hit { way } => {
                    let li = self.lock_index(way, desc.index);
                    if self.locks[li] || !admit_hit(&self.miss_count[di], id) || self.hit_q[di].len() >= depth {
                        return false;
                    }
                    let mut desc = self.desc_q[di].pop_front().unwrap();
                    desc.way = way;
                    self.locks[li] = true;
                    self.tags.touch(way, desc.index, write);
                    self.stats.hits += 1;
                    self.hit_q[di].push_back(desc);
                    true
                }
                Lookup::Miss { way, evict } => {
                    let li = self.lock_index(way, desc.index);
                    if self.locks[li] || self.evict_q.len() >= depth {
                        return false;
                    }
                    let mut desc = self.desc_q[di].pop_front().unwrap();
                    desc.way = way;
                    desc.evict = evict;
                    desc.refill = !write || !self.full_coverage(&desc);
                    self.locks[li] = true;
                    self.tags.allocate(desc.d.line, way, write);
                    self.miss_count[di][id.value() as usize] += 1;
                    self.stats.misses += 1;
                    self.evict_q.push_back(desc);
                    true
                }
                Lookup::NoWay => {
                    // Reconfigured after splitting: no cache way left.
                    let desc = &mut self.desc_q[di][0];
                    desc.kind = Kind::Error;
                    false
                }
            },
            Kind::Flush => unreachable!("flush descriptors use their own queue"),
        }
    }

    fn oldest(&self, di: usize) -> Option<bool> {
        match (self.hit_q[di].front(), self.miss_out[di].front()) {
            (Some(h), Some(m)) => Some(h.seq > m.seq),
            (Some(_), None) => Some(false),
            (None, Some(_)) => Some(true),
            (None, None) => None,
        }
    }

    fn take_data_desc(&mut self, di: usize) -> Option<Desc> {
        let miss = self.oldest(di)?;
        if miss {
            let d = self.miss_out[di].pop_front().unwrap();
            self.miss_count[di][d.d.cmd.id.value() as usize] -= 1;
            Some(d)
        } else {
            self.hit_q[di].pop_front()
        }
    }

    fn release(&mut self, desc: &Desc) {
        if matches!(desc.kind, Kind::Cache | Kind::Spm | Kind::Flush) {
            let li = self.lock_index(desc.way, desc.index);
            debug_assert!(self.locks[li]);
            self.locks[li] = false;
        }
    }

    fn read_beat(&mut self) -> Option<ResponseBeat> {
        if self.read.is_none() {
            let d = self.take_data_desc(Dir::Read.index())?;
            let k = d.d.beats.start;
            self.read = Some((d, k));
        }
        let bb = self.cfg.geom.block_bytes;
        let (desc, k) = self.read.as_ref().unwrap();
        let addr = desc.d.cmd.beat_addr(*k);
        let data = if desc.kind == Kind::Error {
            Bytes::from(vec![0u8; bb])
        } else {
            let off = self.line_offset(desc.way, desc.index) + (addr - desc.d.line) as usize / bb * bb;
            Bytes::copy_from_slice(&self.data[off..off + bb])
        };
        let (desc, k) = self.read.as_mut().unwrap();
        let resp = if desc.kind == Kind::Error { Resp::SlaveError } else { desc.resp };
        *k += 1;
        let done = *k == desc.d.beats.end;
        let beat = ResponseBeat {
            id: desc.d.cmd.id,
            data,
            resp,
            last: done && desc.d.last,
            tag: desc.d.cmd.tag,
        };
        if done {
            let (desc, _) = self.read.take().unwrap();
            self.release(&desc);
        }
        Some(beat)
    }

    fn write_step(&mut self) {
        if self.write.is_none() {
            let Some(d) = self.take_data_desc(Dir::Write.index()) else {
                return;
            };
            self.write = Some((d, 0));
        }
        let bb = self.cfg.geom.block_bytes;
        let (desc, i) = self.write.as_ref().unwrap();
        let i = *i;
        let done = i + 1 == desc.wdata.len();
        if done && desc.d.last && self.b_q.len() >= self.cfg.queue_depth {
            return;
        }
        if desc.kind != Kind::Error {
            let slot = beat_slot(&desc.d.cmd, desc.d.beats.start + i, bb);
            let base = self.line_offset(desc.way, desc.index) + (slot.addr - desc.d.line) as usize / bb * bb;
            let beat = &desc.wdata[i];
            for l in slot.lanes {
                if beat.strb >> l & 1 == 1 {
                    self.data[base + l] = beat.data[l];
                }
            }
        }
        self.write.as_mut().unwrap().1 += 1;
        if done {
            let (desc, _) = self.write.take().unwrap();
            self.release(&desc);
            let r = if desc.kind == Kind::Error { Resp::SlaveError } else { desc.resp };
            let acc = self.w_resp.entry(desc.cmd_no).or_default();
            *acc = acc.merge(r);
            if desc.d.last {
                let resp = self.w_resp.remove(&desc.cmd_no).unwrap_or_default();
                self.b_q.push_back(ResponseBeat::write(desc.d.cmd.id, resp, desc.d.cmd.tag));
            }
        }
    }

    fn line_command(&self, dir: Dir, addr: u64) -> Command {
        let g = self.cfg.geom;
        Command::new(
            dir,
            addr,
            (g.blocks_per_line - 1) as u8,
            g.block_bytes as u64,
            TransactionId::masked(0, self.mid_bits),
        )
    }

    fn evict_w(&self) -> Option<DataBeat> {
        let (p, fired) = *self.mw_order.front()?;
        if !fired {
            return None;
        }
        match p {
            Path::Bypass => self.bw_buf.front().cloned(),
            Path::Core => {
                let u = self.evict.as_ref()?;
                let bb = self.cfg.geom.block_bytes;
                let off = self.line_offset(u.desc.way, u.desc.index) + u.sent * bb;
                Some(DataBeat {
                    data: Bytes::copy_from_slice(&self.data[off..off + bb]),
                    strb: lane_mask(0..bb),
                    last: u.sent + 1 == self.cfg.geom.blocks_per_line,
                    tag: u.desc.seq,
                })
            }
        }
    }

    fn core_busy(&self) -> bool {
        self.desc_q.iter().any(|q| !q.is_empty())
            || self.hit_q.iter().any(|q| !q.is_empty())
            || self.miss_out.iter().any(|q| !q.is_empty())
            || !self.evict_q.is_empty()
            || !self.refill_q.is_empty()
            || self.evict.is_some()
            || self.refill.is_some()
            || self.read.is_some()
            || self.write.is_some()
    }

    fn reconfig_step(&mut self) {
        let Some(r) = &self.reconfig else {
            return;
        };
        match r.phase {
            Phase::Drain => {
                if self.core_busy() {
                    return;
                }
                let g = self.cfg.geom;
                let ways = r.flush_ways;
                for w in (0..g.ways).filter(|w| ways >> w & 1 == 1 && self.tags.spm >> w & 1 == 0) {
                    for i in 0..g.lines {
                        if self.tags.entry(w, i).valid {
                            let line = self.tags.victim_addr(w, i);
                            let d = Descriptor {
                                cmd: self.line_command(Dir::Write, line),
                                line,
                                beats: 0..0,
                                first: true,
                                last: true,
                            };
                            self.seq += 1;
                            self.flush_q.push_back(Desc {
                                seq: self.seq,
                                cmd_no: 0,
                                d,
                                kind: Kind::Flush,
                                way: w,
                                index: i,
                                evict: None,
                                refill: false,
                                wdata: Vec::new(),
                                resp: Resp::Okay,
                            });
                            self.flush_left += 1;
                        }
                    }
                }
                self.reconfig.as_mut().unwrap().phase = Phase::Flush;
            }
            Phase::Flush => {
                if self.flush_left > 0 || self.core_busy() {
                    return;
                }
                let r = self.reconfig.take().unwrap();
                let g = self.cfg.geom;
                // Ways that change role start out empty.
                let changed = r.mask ^ self.tags.spm;
                for w in (0..g.ways).filter(|w| changed >> w & 1 == 1) {
                    for i in 0..g.lines {
                        self.tags.invalidate(w, i);
                    }
                }
                self.tags.spm = r.mask;
                if let Some((mask, flush_ways)) = self.queued.take() {
                    self.schedule(mask, flush_ways);
                }
            }
        }
    }

    fn resp_id(&self, id: TransactionId) -> (Path, TransactionId) {
        let (hi, low) = id.split(self.cfg.id_bits);
        if hi == 0 {
            (Path::Core, low)
        } else {
            (Path::Bypass, low)
        }
    }
}

impl Component for Llc {
    fn kind(&self) -> &'static str {
        "llc"
    }

    fn slave_ports(&self) -> Vec<PortSpec> {
        vec![PortSpec::new(self.cfg.geom.block_bytes, self.cfg.id_bits)]
    }

    fn master_ports(&self) -> Vec<PortSpec> {
        vec![PortSpec::new(self.cfg.geom.block_bytes, self.mid_bits)]
    }

    fn comb_paths(&self) -> Vec<CombPath> {
        [Chan::R, Chan::B]
            .into_iter()
            .map(|c| CombPath::new(Signal::valid(Side::Master, 0, c), Signal::ready(Side::Master, 0, c)))
            .collect()
    }

    fn eval(&mut self, io: &mut Io<'_>) {
        let depth = self.cfg.queue_depth;
        for d in Dir::BOTH {
            io.s_set_cmd_ready(d, 0, self.cmd_q[d.index()].len() < depth);
        }
        let w_ready = match self.w_route.front() {
            Some(&(Path::Bypass, _)) => self.bw_buf.len() < 2 * depth,
            Some(&(Path::Core, seq)) => self.split[Dir::Write.index()]
                .as_ref()
                .is_some_and(|s| s.seq == seq && s.descs.front().is_some_and(|d| s.wdata.len() < d.beats.len())),
            None => false,
        };
        io.s_set_w_ready(0, w_ready);
        io.s_drive_r(0, self.r_out.as_ref().map(|r| r.0.clone()));
        io.s_drive_b(0, self.b_out.as_ref().map(|b| b.0.clone()));

        io.m_drive_ar(0, self.m_ar.map(|c| c.0));
        io.m_drive_aw(0, self.m_aw.map(|c| c.0));
        io.m_drive_w(0, self.evict_w());
        let r_ready = io.m_r(0).is_some_and(|r| match self.resp_id(r.id).0 {
            Path::Core => self.refill.as_ref().is_some_and(|u| u.ar && u.recv < self.cfg.geom.blocks_per_line),
            Path::Bypass => self.br_buf.len() < 2 * depth,
        });
        io.m_set_r_ready(0, r_ready);
        let b_ready = io.m_b(0).is_some_and(|b| match self.resp_id(b.id).0 {
            Path::Core => true,
            Path::Bypass => self.bb_buf.len() < depth,
        });
        io.m_set_b_ready(0, b_ready);
    }

    fn commit(&mut self, io: &Io<'_>, ctx: &mut Ctx<'_>) {
        let depth = self.cfg.queue_depth;
        let g = self.cfg.geom;
        let (ri, wi) = (Dir::Read.index(), Dir::Write.index());

        // Slave responses.
        if io.s_r_fire(0).is_some() {
            let (beat, path) = self.r_out.take().unwrap();
            if beat.last {
                let out = match path {
                    Path::Core => &mut self.core_out[ri],
                    Path::Bypass => &mut self.byp_out[ri],
                };
                out[beat.id.value() as usize] -= 1;
            }
        }
        if io.s_b_fire(0).is_some() {
            let (beat, path) = self.b_out.take().unwrap();
            let out = match path {
                Path::Core => &mut self.core_out[wi],
                Path::Bypass => &mut self.byp_out[wi],
            };
            out[beat.id.value() as usize] -= 1;
        }

        // Master responses.
        if let Some(r) = io.m_r_fire(0) {
            let (path, id) = self.resp_id(r.id);
            match path {
                Path::Core => {
                    let off = {
                        let u = self.refill.as_ref().unwrap();
                        self.line_offset(u.desc.way, u.desc.index) + u.recv * g.block_bytes
                    };
                    self.data[off..off + g.block_bytes].copy_from_slice(&r.data[..g.block_bytes]);
                    let u = self.refill.as_mut().unwrap();
                    u.recv += 1;
                    u.desc.resp = u.desc.resp.merge(r.resp);
                }
                Path::Bypass => {
                    let mut r = r.clone();
                    r.id = id;
                    self.br_buf.push_back(r);
                }
            }
        }
        if let Some(b) = io.m_b_fire(0) {
            let (path, id) = self.resp_id(b.id);
            match path {
                Path::Core => {
                    if self.evicting.pop_front().is_none() {
                        ctx.report(Rule::Orphan, "write-back response without a write-back");
                    }
                }
                Path::Bypass => {
                    let mut b = b.clone();
                    b.id = id;
                    self.bb_buf.push_back(b);
                }
            }
        }

        // Master commands and write data.
        if io.m_ar_fire(0).is_some() {
            self.m_ar = None;
        }
        if io.m_aw_fire(0).is_some() {
            let (_, path) = self.m_aw.take().unwrap();
            let slot = self.mw_order.iter_mut().find(|s| !s.1).unwrap();
            debug_assert_eq!(slot.0, path);
            slot.1 = true;
        }
        if let Some(w) = io.m_w_fire(0) {
            let last = w.last;
            match self.mw_order.front().unwrap().0 {
                Path::Bypass => {
                    self.bw_buf.pop_front();
                }
                Path::Core => self.evict.as_mut().unwrap().sent += 1,
            }
            if last {
                self.mw_order.pop_front();
            }
        }

        // Refill unit.
        if let Some(u) = &self.refill {
            let done = !u.desc.refill || u.recv == g.blocks_per_line;
            let di = u.desc.d.cmd.dir.index();
            if done && self.miss_out[di].len() < depth {
                let u = self.refill.take().unwrap();
                self.miss_out[di].push_back(u.desc);
            }
        }
        if self.refill.is_none() {
            if let Some(desc) = self.refill_q.pop_front() {
                if desc.refill {
                    self.stats.refills += 1;
                }
                self.refill = Some(RefillUnit { desc, ar: false, recv: 0 });
            }
        }

        // Eviction unit.
        if let Some(u) = &self.evict {
            let done = u.desc.evict.is_none() || u.sent == g.blocks_per_line;
            if done {
                if u.desc.kind == Kind::Flush {
                    let u = self.evict.take().unwrap();
                    self.release(&u.desc);
                    self.flush_left -= 1;
                } else if self.refill_q.len() < depth {
                    let u = self.evict.take().unwrap();
                    self.refill_q.push_back(u.desc);
                }
            }
        }
        if self.evict.is_none() {
            if let Some(desc) = self.evict_q.pop_front() {
                if desc.evict.is_some() {
                    self.stats.evictions += 1;
                }
                self.evict = Some(EvictUnit { desc, aw: false, sent: 0 });
            }
        }

        // Master command registers.
        if self.m_ar.is_none() {
            let refill = self.refill.as_ref().and_then(|u| {
                (u.desc.refill && !u.ar && !self.evicting.contains(&u.desc.d.line)).then_some(u.desc.d.line)
            });
            let byp = self.byp_ar.front().is_some();
            let pick_refill = refill.is_some() && (!byp || !self.ar_rr);
            if pick_refill {
                let cmd = self.line_command(Dir::Read, refill.unwrap());
                self.m_ar = Some((cmd, Path::Core));
                self.refill.as_mut().unwrap().ar = true;
                self.ar_rr = true;
            } else if byp {
                let cmd = self.byp_ar.pop_front().unwrap();
                self.m_ar = Some((cmd, Path::Bypass));
                self.ar_rr = false;
            }
        }
        if self.m_aw.is_none() {
            let evict = self.evict.as_ref().and_then(|u| u.desc.evict.filter(|_| !u.aw));
            let head_seq = self.w_route.front().map_or(self.aw_seq, |w| w.1);
            let byp = self.byp_aw.front().is_some_and(|&(_, s)| s <= head_seq);
            if let Some(line) = evict.filter(|_| !byp || !self.aw_rr) {
                let tag = self.evict.as_ref().unwrap().desc.seq;
                self.m_aw = Some((self.line_command(Dir::Write, line).with_tag(tag), Path::Core));
                self.evict.as_mut().unwrap().aw = true;
                self.evicting.push_back(line);
                self.mw_order.push_back((Path::Core, false));
                self.aw_rr = true;
            } else if byp {
                let (cmd, _) = self.byp_aw.pop_front().unwrap();
                self.m_aw = Some((cmd, Path::Bypass));
                self.mw_order.push_back((Path::Bypass, false));
                self.aw_rr = false;
            }
        }

        // Data units and slave response registers.
        self.write_step();
        if self.r_out.is_none() {
            let core_first = !self.r_rr || self.br_buf.is_empty();
            let beat = if core_first { self.read_beat() } else { None };
            if let Some(b) = beat {
                self.r_out = Some((b, Path::Core));
                self.r_rr = true;
            } else if let Some(b) = self.br_buf.pop_front() {
                self.r_out = Some((b, Path::Bypass));
                self.r_rr = false;
            } else if let Some(b) = self.read_beat() {
                self.r_out = Some((b, Path::Core));
                self.r_rr = true;
            }
        }
        if self.b_out.is_none() {
            if !self.b_q.is_empty() && (!self.b_rr || self.bb_buf.is_empty()) {
                self.b_out = Some((self.b_q.pop_front().unwrap(), Path::Core));
                self.b_rr = true;
            } else if let Some(b) = self.bb_buf.pop_front() {
                self.b_out = Some((b, Path::Bypass));
                self.b_rr = false;
            }
        }

        self.lookup_stage();

        // Write data: collected by the write splitter or queued for bypass.
        if let Some(w) = io.s_w_fire(0) {
            let last = w.last;
            match self.w_route.front().unwrap().0 {
                Path::Bypass => self.bw_buf.push_back(w.clone()),
                Path::Core => self.split[wi].as_mut().unwrap().wdata.push(w.clone()),
            }
            if last {
                self.w_route.pop_front();
            }
        }

        // Splitters emit one descriptor per cycle unless a reconfiguration
        // is pending.
        let paused = self.reconfig.is_some();
        for d in Dir::BOTH {
            let di = d.index();
            if paused || self.desc_q[di].len() >= depth {
                continue;
            }
            let Some(s) = &mut self.split[di] else {
                continue;
            };
            let Some(next) = s.descs.front() else {
                continue;
            };
            if d == Dir::Write && s.wdata.len() < next.beats.len() {
                continue;
            }
            let next = s.descs.pop_front().unwrap();
            let wdata = std::mem::take(&mut s.wdata);
            let cmd_no = s.cmd_no;
            if s.descs.is_empty() {
                self.split[di] = None;
            }
            let desc = self.make_desc(next, cmd_no, wdata);
            self.desc_q[di].push_back(desc);
        }

        // Dispatch accepted commands to the core or the bypass.
        for d in Dir::BOTH {
            let di = d.index();
            let Some(&(cmd, path, seq)) = self.cmd_q[di].front() else {
                continue;
            };
            let id = cmd.id.value() as usize;
            match path {
                Path::Core => {
                    if self.split[di].is_some() || self.byp_out[di][id] > 0 {
                        continue;
                    }
                    self.cmd_no += 1;
                    self.split[di] = Some(Split {
                        cmd_no: self.cmd_no,
                        seq,
                        descs: split_command(&cmd, &g).into(),
                        wdata: Vec::new(),
                    });
                    self.core_out[di][id] += 1;
                }
                Path::Bypass => {
                    let full = match d {
                        Dir::Read => self.byp_ar.len() >= depth,
                        Dir::Write => self.byp_aw.len() >= depth,
                    };
                    if full || self.core_out[di][id] > 0 {
                        continue;
                    }
                    let mut out = cmd;
                    out.id = cmd.id.prepend(1, 1, self.cfg.id_bits);
                    match d {
                        Dir::Read => self.byp_ar.push_back(out),
                        Dir::Write => self.byp_aw.push_back((out, seq)),
                    }
                    self.byp_out[di][id] += 1;
                    self.stats.bypassed += 1;
                }
            }
            self.cmd_q[di].pop_front();
        }

        // Accept new commands.
        for d in Dir::BOTH {
            if let Some(cmd) = io.s_cmd_fire(d, 0) {
                let path = self.classify(cmd);
                let seq = match d {
                    Dir::Write => {
                        self.aw_seq += 1;
                        self.w_route.push_back((path, self.aw_seq));
                        self.aw_seq
                    }
                    Dir::Read => 0,
                };
                self.cmd_q[d.index()].push_back((*cmd, path, seq));
            }
        }

        self.reconfig_step();
    }

    fn busy(&self) -> bool {
        self.core_busy()
            || self.reconfig.is_some()
            || self.cmd_q.iter().any(|q| !q.is_empty())
            || self.split.iter().any(|s| s.is_some())
            || !self.w_route.is_empty()
            || !self.b_q.is_empty()
            || self.r_out.is_some()
            || self.b_out.is_some()
            || !self.byp_ar.is_empty()
            || !self.byp_aw.is_empty()
            || !self.bw_buf.is_empty()
            || !self.br_buf.is_empty()
            || !self.bb_buf.is_empty()
            || self.m_ar.is_some()
            || self.m_aw.is_some()
            || !self.mw_order.is_empty()
            || !self.evicting.is_empty()
            || self.core_out.iter().chain(&self.byp_out).any(|v| v.iter().any(|&c| c > 0))
    }

    fn describe(&self) -> String {
        format!(
            "cmd {}/{} desc {}/{} hit {}/{} evict {} refill {} miss out {}/{} read {} write {} locks {} reconfig {:?}",
            self.cmd_q[0].len(),
            self.cmd_q[1].len(),
            self.desc_q[0].len(),
            self.desc_q[1].len(),
            self.hit_q[0].len(),
            self.hit_q[1].len(),
            self.evict_q.len() + self.evict.is_some() as usize,
            self.refill_q.len() + self.refill.is_some() as usize,
            self.miss_out[0].len(),
            self.miss_out[1].len(),
            self.read.is_some(),
            self.write.is_some(),
            self.locks.iter().filter(|&&l| l).count(),
            self.reconfig.as_ref().map(|r| r.phase),
        )
    }
}
