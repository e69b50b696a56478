//! Generic traffic master. Pulls requests from a [`TrafficSource`], issues
//! them within configured concurrency limits, and records every completed
//! transaction so that an oracle can replay it.

use std::collections::{BTreeMap, HashMap, VecDeque};

use bytes::Bytes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kernel::{Component, Ctx, Io, PortSpec};
use crate::protocol::{
    beat_slot, lane_mask, Attrs, Command, DataBeat, Dir, Resp, ResponseBeat, Rule, TransactionId, BOUNDARY_BYTES,
};
use crate::ConfigError;

/// A transaction to issue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Request {
    pub dir: Dir,
    pub addr: u64,
    /// Beat count minus one.
    pub len: u8,
    pub size: u64,
    pub id: u32,
    pub attrs: Attrs,
}

impl Request {
    pub fn read(addr: u64, len: u8, size: u64, id: u32) -> Self {
        Self {
            dir: Dir::Read,
            addr,
            len,
            size,
            id,
            attrs: Attrs {
                modifiable: true,
                qos: 0,
            },
        }
    }

    pub fn write(addr: u64, len: u8, size: u64, id: u32) -> Self {
        Self {
            dir: Dir::Write,
            ..Self::read(addr, len, size, id)
        }
    }

    fn range(&self) -> (u64, u64) {
        let aligned = self.addr & !(self.size - 1);
        (self.addr, aligned + (self.len as u64 + 1) * self.size)
    }
}

/// Produces requests for an [`Initiator`].
pub trait TrafficSource: Send {
    /// The next request, or `None` if there is nothing to issue in this
    /// cycle. Called at most once per cycle, and only when the previous
    /// request was taken.
    fn next(&mut self, cycle: u64, rng: &mut ChaCha8Rng) -> Option<Request>;

    /// True once no further requests will ever be produced.
    fn exhausted(&self) -> bool;
}

/// Replays a fixed list of `(earliest cycle, request)` pairs.
#[derive(Debug, Clone, Default)]
pub struct ScriptSource {
    items: VecDeque<(u64, Request)>,
}

impl ScriptSource {
    pub fn new(items: impl IntoIterator<Item = (u64, Request)>) -> Self {
        Self {
            items: items.into_iter().collect(),
        }
    }

    /// All requests as early as possible.
    pub fn asap(reqs: impl IntoIterator<Item = Request>) -> Self {
        Self::new(reqs.into_iter().map(|r| (0, r)))
    }
}

impl TrafficSource for ScriptSource {
    fn next(&mut self, cycle: u64, _rng: &mut ChaCha8Rng) -> Option<Request> {
        if self.items.front()?.0 <= cycle {
            self.items.pop_front().map(|(_, r)| r)
        } else {
            None
        }
    }

    fn exhausted(&self) -> bool {
        self.items.is_empty()
    }
}

/// Uniformly random bursts over a set of address ranges.
#[derive(Debug, Clone)]
pub struct RandomSource {
    pub ranges: Vec<(u64, u64)>,
    pub data_bytes: usize,
    pub read_fraction: f64,
    /// Inclusive range of beats per burst.
    pub beats: (usize, usize),
    /// Draw beat sizes below the data width.
    pub narrow: bool,
    /// Allow a first beat that is not aligned to the beat size.
    pub unaligned: bool,
    pub ids: u32,
    /// Probability of producing a request in a cycle.
    pub rate: f64,
    /// Fraction of requests without the modifiable attribute.
    pub fixed_fraction: f64,
    pub limit: Option<u64>,
    produced: u64,
}

impl RandomSource {
    pub fn new(ranges: Vec<(u64, u64)>, data_bytes: usize, ids: u32) -> Self {
        Self {
            ranges,
            data_bytes,
            read_fraction: 0.5,
            beats: (1, 8),
            narrow: false,
            unaligned: false,
            ids: ids.max(1),
            rate: 1.0,
            fixed_fraction: 0.0,
            limit: None,
            produced: 0,
        }
    }

    pub fn produced(&self) -> u64 {
        self.produced
    }

    /// Draws one protocol-compliant request.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Option<Request> {
        let (lo, hi) = self.ranges[rng.gen_range(0..self.ranges.len())];
        let size = if self.narrow {
            1u64 << rng.gen_range(0..=self.data_bytes.trailing_zeros())
        } else {
            self.data_bytes as u64
        };
        let slots = (hi - lo) / size;
        if slots == 0 {
            return None;
        }
        let mut addr = lo + rng.gen_range(0..slots) * size;
        if self.unaligned && size > 1 && rng.gen_bool(0.5) {
            addr += rng.gen_range(0..size);
        }
        let aligned = addr & !(size - 1);
        let page_end = (aligned / BOUNDARY_BYTES + 1) * BOUNDARY_BYTES;
        let fit = ((page_end.min(hi) - aligned) / size) as usize;
        let want = rng.gen_range(self.beats.0..=self.beats.1);
        let beats = want.min(fit).min(256);
        if beats == 0 {
            return None;
        }
        let dir = if rng.gen_bool(self.read_fraction) { Dir::Read } else { Dir::Write };
        let modifiable = !(self.fixed_fraction > 0.0 && rng.gen_bool(self.fixed_fraction));
        Some(Request {
            dir,
            addr,
            len: (beats - 1) as u8,
            size,
            id: rng.gen_range(0..self.ids),
            attrs: Attrs { modifiable, qos: 0 },
        })
    }
}

impl TrafficSource for RandomSource {
    fn next(&mut self, _cycle: u64, rng: &mut ChaCha8Rng) -> Option<Request> {
        if self.exhausted() || (self.rate < 1.0 && !rng.gen_bool(self.rate)) {
            return None;
        }
        let r = self.draw(rng)?;
        self.produced += 1;
        Some(r)
    }

    fn exhausted(&self) -> bool {
        self.limit.is_some_and(|l| self.produced >= l)
    }
}

#[derive(Debug, Clone)]
pub struct InitiatorConfig {
    pub data_bytes: usize,
    pub id_bits: u8,
    /// Outstanding transactions per direction.
    pub max_outstanding: usize,
    /// Outstanding transactions per ID and direction.
    pub max_per_id: usize,
    /// Distinct outstanding IDs per direction.
    pub max_ids: usize,
    /// Keep reads and writes with overlapping bytes from being in flight
    /// together, so that the memory image is deterministic.
    pub avoid_hazards: bool,
    pub record: bool,
    /// Probability that R and B ready are high in a cycle.
    pub ready_prob: f64,
    pub random_strobes: bool,
    pub seed: u64,
}

impl InitiatorConfig {
    pub fn new(data_bytes: usize, id_bits: u8) -> Self {
        Self {
            data_bytes,
            id_bits,
            max_outstanding: 8,
            max_per_id: 8,
            max_ids: usize::MAX,
            avoid_hazards: true,
            record: false,
            ready_prob: 1.0,
            random_strobes: false,
            seed: 0,
        }
    }
}

/// One completed transaction as seen by the initiator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    /// Position in issue order across both directions.
    pub seq: u64,
    pub cmd: Command,
    /// Written `(address, byte)` pairs, or read `(address, byte)` pairs for
    /// every active byte lane.
    pub bytes: Vec<(u64, u8)>,
    pub resp: Resp,
    pub issued: u64,
    pub completed: u64,
}

#[derive(Debug, Clone)]
struct Txn {
    cmd: Command,
    seq: u64,
    issued: u64,
    beat: usize,
    bytes: Vec<(u64, u8)>,
    resp: Resp,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InitiatorStats {
    pub issued: [u64; 2],
    pub completed: [u64; 2],
    pub beats: [u64; 2],
    pub errors: u64,
    pub first_issue: Option<u64>,
    pub last_complete: Option<u64>,
}

/// Traffic master with one master port.
pub struct Initiator {
    cfg: InitiatorConfig,
    source: Box<dyn TrafficSource>,
    rng: ChaCha8Rng,
    staged: Option<Request>,
    slot: [Option<Txn>; 2],
    w_beats: VecDeque<DataBeat>,
    outstanding: [HashMap<u32, VecDeque<Txn>>; 2],
    count: [usize; 2],
    ranges: Vec<(u64, u64, Dir, u64)>,
    ready: [bool; 2],
    stopped: bool,
    seq: u64,
    tag_base: u64,
    records: Vec<Record>,
    latency: BTreeMap<u64, u64>,
    stats: InitiatorStats,
}

impl Initiator {
    pub fn new(cfg: InitiatorConfig, source: Box<dyn TrafficSource>) -> Result<Self, ConfigError> {
        if !cfg.data_bytes.is_power_of_two() || cfg.data_bytes > crate::protocol::MAX_DATA_BYTES {
            return Err(ConfigError::invalid(format!("initiator data width {} unsupported", cfg.data_bytes)));
        }
        if cfg.max_outstanding == 0 || cfg.max_per_id == 0 || cfg.max_ids == 0 {
            return Err(ConfigError::invalid("initiator concurrency limits must be at least 1"));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            tag_base: cfg.seed.wrapping_mul(0x1_0000_0000),
            cfg,
            source,
            staged: None,
            slot: [None, None],
            w_beats: VecDeque::new(),
            outstanding: [HashMap::new(), HashMap::new()],
            count: [0, 0],
            ranges: Vec::new(),
            ready: [true, true],
            stopped: false,
            seq: 0,
            records: Vec::new(),
            latency: BTreeMap::new(),
            stats: InitiatorStats::default(),
        })
    }

    /// Distinguishes the tags of several initiators in one netlist.
    pub fn with_tag_base(mut self, base: u64) -> Self {
        self.tag_base = base;
        self
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn take_records(&mut self) -> Vec<Record> {
        std::mem::take(&mut self.records)
    }

    pub fn latency(&self) -> &BTreeMap<u64, u64> {
        &self.latency
    }

    pub fn stats(&self) -> InitiatorStats {
        self.stats
    }

    pub fn config(&self) -> &InitiatorConfig {
        &self.cfg
    }

    pub fn outstanding(&self) -> usize {
        self.count[0] + self.count[1]
    }

    fn in_flight(&self, dir: Dir, id: u32) -> usize {
        self.outstanding[dir.index()].get(&id).map_or(0, |q| q.len())
            + self.slot[dir.index()].as_ref().is_some_and(|t| t.cmd.id.value() == id) as usize
    }

    fn can_take(&self, r: &Request) -> bool {
        let d = r.dir.index();
        if self.slot[d].is_some() || self.count[d] >= self.cfg.max_outstanding {
            return false;
        }
        if self.in_flight(r.dir, r.id) >= self.cfg.max_per_id {
            return false;
        }
        if self.in_flight(r.dir, r.id) == 0 && self.outstanding[d].len() >= self.cfg.max_ids {
            return false;
        }
        if self.cfg.avoid_hazards {
            let (lo, hi) = r.range();
            if self
                .ranges
                .iter()
                .any(|&(a, b, dir, _)| a < hi && lo < b && (dir == Dir::Write || r.dir == Dir::Write))
            {
                return false;
            }
        }
        true
    }

    fn take(&mut self, r: Request, cycle: u64) {
        let id = TransactionId::masked(r.id, self.cfg.id_bits);
        let tag = self.tag_base.wrapping_add(self.seq);
        let cmd = Command::new(r.dir, r.addr, r.len, r.size, id).with_attrs(r.attrs).with_tag(tag);
        let range = r.range();
        let mut txn = Txn {
            cmd,
            seq: self.seq,
            issued: cycle,
            beat: 0,
            bytes: Vec::new(),
            resp: Resp::Okay,
        };
        self.seq += 1;
        self.ranges.push((range.0, range.1, r.dir, tag));
        if r.dir == Dir::Write {
            txn.bytes = self.make_write_bytes(&cmd);
        }
        self.count[r.dir.index()] += 1;
        self.slot[r.dir.index()] = Some(txn);
    }

    fn make_write_bytes(&mut self, cmd: &Command) -> Vec<(u64, u8)> {
        let d = self.cfg.data_bytes;
        let mut bytes = Vec::with_capacity(cmd.byte_count() as usize);
        for k in 0..cmd.beats() {
            let slot = beat_slot(cmd, k, d);
            let base = slot.addr - slot.addr % d as u64;
            for lane in slot.lanes {
                if !self.cfg.random_strobes || self.rng.gen_bool(0.75) {
                    bytes.push((base + lane as u64, self.rng.gen()));
                }
            }
        }
        bytes
    }

    fn write_beats(&self, t: &Txn) -> Vec<DataBeat> {
        let d = self.cfg.data_bytes;
        let mut it = t.bytes.iter().peekable();
        (0..t.cmd.beats())
            .map(|k| {
                let slot = beat_slot(&t.cmd, k, d);
                let base = slot.addr - slot.addr % d as u64;
                let mut data = vec![0u8; d];
                let mut strb = 0u128;
                while let Some(&&(a, v)) = it.peek() {
                    if a >= base + slot.lanes.end as u64 {
                        break;
                    }
                    let lane = (a - base) as usize;
                    data[lane] = v;
                    strb |= 1 << lane;
                    it.next();
                }
                DataBeat {
                    data: Bytes::from(data),
                    strb,
                    last: k + 1 == t.cmd.beats(),
                    tag: t.cmd.tag,
                }
            })
            .collect()
    }

    fn complete(&mut self, dir: Dir, mut t: Txn, cycle: u64) {
        self.count[dir.index()] -= 1;
        self.stats.completed[dir.index()] += 1;
        self.stats.last_complete = Some(cycle);
        if t.resp.is_error() {
            self.stats.errors += 1;
        }
        *self.latency.entry(cycle - t.issued).or_default() += 1;
        if let Some(i) = self.ranges.iter().position(|r| r.3 == t.cmd.tag) {
            self.ranges.swap_remove(i);
        }
        if self.cfg.record {
            self.records.push(Record {
                seq: t.seq,
                cmd: t.cmd,
                bytes: std::mem::take(&mut t.bytes),
                resp: t.resp,
                issued: t.issued,
                completed: cycle,
            });
        }
    }

    fn on_read_beat(&mut self, r: &ResponseBeat, ctx: &mut Ctx<'_>) {
        let id = r.id.value();
        let Some(t) = self.outstanding[0].get_mut(&id).and_then(|q| q.front_mut()) else {
            ctx.report(Rule::Orphan, format!("read response for idle ID {id:#x}"));
            return;
        };
        if t.cmd.tag != r.tag {
            ctx.report(Rule::Order, format!("read response {:#x} where {:#x} was expected", r.tag, t.cmd.tag));
        }
        let d = self.cfg.data_bytes;
        let slot = beat_slot(&t.cmd, t.beat, d);
        if self.cfg.record {
            let base = slot.addr - slot.addr % d as u64;
            for lane in slot.lanes.clone() {
                t.bytes.push((base + lane as u64, r.data.get(lane).copied().unwrap_or(0)));
            }
        }
        t.resp = t.resp.merge(r.resp);
        t.beat += 1;
        self.stats.beats[0] += 1;
        let done = t.beat == t.cmd.beats();
        if done != r.last {
            ctx.report(Rule::Burst, format!("read {:#x}: last flag on beat {}", t.cmd.tag, t.beat));
        }
        if r.last || done {
            let q = self.outstanding[0].get_mut(&id).unwrap();
            let t = q.pop_front().unwrap();
            if q.is_empty() {
                self.outstanding[0].remove(&id);
            }
            self.complete(Dir::Read, t, ctx.cycle);
        }
    }

    fn on_write_resp(&mut self, b: &ResponseBeat, ctx: &mut Ctx<'_>) {
        let id = b.id.value();
        let Some(q) = self.outstanding[1].get_mut(&id) else {
            ctx.report(Rule::Orphan, format!("write response for idle ID {id:#x}"));
            return;
        };
        let mut t = q.pop_front().unwrap();
        if q.is_empty() {
            self.outstanding[1].remove(&id);
        }
        if t.cmd.tag != b.tag {
            ctx.report(Rule::Order, format!("write response {:#x} where {:#x} was expected", b.tag, t.cmd.tag));
        }
        t.resp = b.resp;
        self.complete(Dir::Write, t, ctx.cycle);
    }
}

impl Component for Initiator {
    fn kind(&self) -> &'static str {
        "initiator"
    }

    fn slave_ports(&self) -> Vec<PortSpec> {
        vec![]
    }

    fn master_ports(&self) -> Vec<PortSpec> {
        vec![PortSpec::new(self.cfg.data_bytes, self.cfg.id_bits)]
    }

    fn eval(&mut self, io: &mut Io<'_>) {
        io.m_drive_ar(0, self.slot[0].as_ref().map(|t| t.cmd));
        io.m_drive_aw(0, self.slot[1].as_ref().map(|t| t.cmd));
        io.m_drive_w(0, self.w_beats.front().cloned());
        io.m_set_r_ready(0, self.ready[0]);
        io.m_set_b_ready(0, self.ready[1]);
    }

    fn commit(&mut self, io: &Io<'_>, ctx: &mut Ctx<'_>) {
        let cycle = io.cycle();
        if let Some(r) = io.m_r_fire(0) {
            let r = r.clone();
            self.on_read_beat(&r, ctx);
        }
        if let Some(b) = io.m_b_fire(0) {
            let b = b.clone();
            self.on_write_resp(&b, ctx);
        }
        if io.m_w_fire(0).is_some() {
            self.w_beats.pop_front();
            self.stats.beats[1] += 1;
        }
        for dir in [Dir::Read, Dir::Write] {
            let fired = match dir {
                Dir::Read => io.m_ar_fire(0).is_some(),
                Dir::Write => io.m_aw_fire(0).is_some(),
            };
            if !fired {
                continue;
            }
            let mut t = self.slot[dir.index()].take().unwrap();
            t.issued = cycle;
            if dir == Dir::Write {
                let beats = self.write_beats(&t);
                self.w_beats.extend(beats);
                if !self.cfg.record {
                    t.bytes = Vec::new();
                }
            }
            self.stats.issued[dir.index()] += 1;
            self.stats.first_issue.get_or_insert(cycle);
            self.outstanding[dir.index()].entry(t.cmd.id.value()).or_default().push_back(t);
        }

        if !self.stopped {
            for _ in 0..2 {
                if self.staged.is_none() {
                    self.staged = self.source.next(cycle, &mut self.rng);
                }
                match self.staged {
                    Some(r) if self.can_take(&r) => {
                        self.staged = None;
                        self.take(r, cycle);
                    }
                    _ => break,
                }
            }
        }
        if self.cfg.ready_prob < 1.0 {
            let p = self.cfg.ready_prob;
            self.ready = [self.rng.gen_bool(p), self.rng.gen_bool(p)];
        }
    }

    fn busy(&self) -> bool {
        self.count[0] + self.count[1] > 0
            || !self.w_beats.is_empty()
            || (!self.stopped && (self.staged.is_some() || !self.source.exhausted()))
    }

    fn stop(&mut self) {
        self.stopped = true;
        self.staged = None;
    }

    fn describe(&self) -> String {
        format!(
            "reads {} writes {} w beats {} slots {}/{}",
            self.count[0],
            self.count[1],
            self.w_beats.len(),
            self.slot[0].is_some() as u8,
            self.slot[1].is_some() as u8
        )
    }
}

/// Mask of the active byte lanes of beat `k`.
pub fn beat_strobe(cmd: &Command, k: usize, data_bytes: usize) -> u128 {
    lane_mask(beat_slot(cmd, k, data_bytes).lanes)
}
