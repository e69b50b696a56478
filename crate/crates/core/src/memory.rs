//! Memory endpoints: single-port SRAM banks, a simplex controller (one
//! access per cycle), a duplex controller (parallel read and write over
//! address-interleaved banks), and a behavioral memory with random,
//! per-ID-ordered response latency.

use std::collections::{HashMap, VecDeque};

use bytes::Bytes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kernel::{Component, Ctx, Io, PortSpec, StreamFifo};
use crate::protocol::{beat_slot, lane_mask, Command, DataBeat, Resp, ResponseBeat, MAX_DATA_BYTES};
use crate::ConfigError;

/// Content of memory that was never written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MemInit {
    #[default]
    Zero,
    /// Pseudo-random bytes derived from the address and a seed.
    Pattern(u64),
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl MemInit {
    pub fn byte(self, addr: u64) -> u8 {
        match self {
            MemInit::Zero => 0,
            MemInit::Pattern(seed) => (splitmix(seed ^ (addr >> 3)) >> ((addr & 7) * 8)) as u8,
        }
    }
}

/// Bank holding a word and the word's index inside that bank.
pub fn route_bank(addr: u64, word_bytes: usize, banks: usize) -> (usize, u64) {
    let word = addr / word_bytes as u64;
    ((word % banks as u64) as usize, word / banks as u64)
}

/// Single-port SRAM macro: one word access per cycle, read data available
/// the cycle after the request.
#[derive(Debug, Clone)]
pub struct SramBank {
    base: u64,
    bank: usize,
    banks: usize,
    word_bytes: usize,
    init: MemInit,
    words: HashMap<u64, Box<[u8]>>,
}

impl SramBank {
    /// Bank `bank` of `banks`, interleaved by word above address `base`.
    pub fn new(base: u64, bank: usize, banks: usize, word_bytes: usize, init: MemInit) -> Self {
        Self {
            base,
            bank,
            banks,
            word_bytes,
            init,
            words: HashMap::new(),
        }
    }

    fn global_addr(&self, index: u64) -> u64 {
        self.base + (index * self.banks as u64 + self.bank as u64) * self.word_bytes as u64
    }

    pub fn read(&self, index: u64, out: &mut [u8]) {
        match self.words.get(&index) {
            Some(w) => out.copy_from_slice(w),
            None => {
                let base = self.global_addr(index);
                for (i, b) in out.iter_mut().enumerate() {
                    *b = self.init.byte(base + i as u64);
                }
            }
        }
    }

    /// Writes the bytes whose strobe bit is set.
    pub fn write(&mut self, index: u64, data: &[u8], strb: u128) {
        if strb == 0 {
            return;
        }
        let wb = self.word_bytes;
        let base = self.global_addr(index);
        let init = self.init;
        let w = self.words.entry(index).or_insert_with(|| (0..wb as u64).map(|i| init.byte(base + i)).collect());
        for (i, b) in w.iter_mut().enumerate() {
            if strb >> i & 1 == 1 {
                *b = data[i];
            }
        }
    }

    pub fn words_written(&self) -> usize {
        self.words.len()
    }
}

/// Word-interleaved storage spread over `banks` SRAM banks, addressed
/// relative to the controller's base.
#[derive(Debug, Clone)]
struct Storage {
    word_bytes: usize,
    base: u64,
    banks: Vec<SramBank>,
}

impl Storage {
    fn new(word_bytes: usize, base: u64, banks: usize, init: MemInit) -> Self {
        let banks = (0..banks).map(|b| SramBank::new(base, b, banks, word_bytes, init)).collect();
        Self { word_bytes, base, banks }
    }

    fn bank_of(&self, addr: u64) -> (usize, u64) {
        route_bank(addr - self.base, self.word_bytes, self.banks.len())
    }

    fn read_word(&self, addr: u64) -> Bytes {
        let (b, i) = self.bank_of(addr);
        let mut v = vec![0u8; self.word_bytes];
        self.banks[b].read(i, &mut v);
        Bytes::from(v)
    }

    fn write_word(&mut self, addr: u64, data: &[u8], strb: u128) {
        let (b, i) = self.bank_of(addr);
        self.banks[b].write(i, data, strb);
    }

    fn peek(&self, addr: u64) -> u8 {
        let w = addr - addr % self.word_bytes as u64;
        self.read_word(w)[(addr - w) as usize]
    }

    fn poke(&mut self, addr: u64, v: u8) {
        let w = addr - addr % self.word_bytes as u64;
        let mut data = vec![0u8; self.word_bytes];
        let lane = (addr - w) as usize;
        data[lane] = v;
        self.write_word(w, &data, 1u128 << lane);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Read,
    Write,
    Idle,
}

/// Read/write arbitration of a simplex controller. An open write burst
/// wins when `prioritize_writes` is set; otherwise the higher QoS wins and
/// ties alternate, starting after `last`.
pub fn simplex_arbitrate(
    read_req: bool,
    write_req: bool,
    write_burst_open: bool,
    qos: (u8, u8),
    last: Access,
    prioritize_writes: bool,
) -> Access {
    match (read_req, write_req) {
        (false, false) => Access::Idle,
        (true, false) => Access::Read,
        (false, true) => Access::Write,
        (true, true) => {
            if prioritize_writes && write_burst_open {
                Access::Write
            } else if qos.0 != qos.1 {
                if qos.0 > qos.1 {
                    Access::Read
                } else {
                    Access::Write
                }
            } else if last == Access::Read {
                Access::Write
            } else {
                Access::Read
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MemConfig {
    pub data_bytes: usize,
    pub id_bits: u8,
    pub base: u64,
    pub size: u64,
    /// Command queue depth per direction.
    pub cmd_depth: usize,
    /// Read response buffer depth in beats, also used for write responses.
    /// Sustaining one beat per cycle needs at least `extra_latency + 2`.
    pub resp_depth: usize,
    /// Cycles added to every read and write response.
    pub extra_latency: u64,
    pub prioritize_writes: bool,
    /// Number of banks (duplex only).
    pub banks: usize,
    pub init: MemInit,
}

impl MemConfig {
    pub fn new(data_bytes: usize, id_bits: u8, base: u64, size: u64) -> Self {
        Self {
            data_bytes,
            id_bits,
            base,
            size,
            cmd_depth: 4,
            resp_depth: 8,
            extra_latency: 0,
            prioritize_writes: true,
            banks: 2,
            init: MemInit::Zero,
        }
    }

    fn validate(&self, duplex: bool) -> Result<(), ConfigError> {
        if !self.data_bytes.is_power_of_two() || self.data_bytes > MAX_DATA_BYTES {
            return Err(ConfigError::invalid(format!("memory data width {} bytes unsupported", self.data_bytes)));
        }
        if self.cmd_depth == 0 || self.resp_depth == 0 {
            return Err(ConfigError::invalid("memory queue depths must be at least 1"));
        }
        if !self.base.is_multiple_of(self.data_bytes as u64) {
            return Err(ConfigError::invalid("memory base must be aligned to the data width"));
        }
        if duplex && (self.banks < 2 || !self.banks.is_power_of_two()) {
            return Err(ConfigError::invalid(format!(
                "duplex memory needs a power-of-two bank count of at least 2, got {}",
                self.banks
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Job {
    cmd: Command,
    next: usize,
    resp: Resp,
}

/// Unpacks read commands into beat requests and buffers responses.
#[derive(Debug, Clone)]
struct ReadCore {
    cmds: StreamFifo<Job>,
    resp: VecDeque<(u64, ResponseBeat)>,
    depth: usize,
    beats: u64,
}

impl ReadCore {
    fn new(cfg: &MemConfig) -> Self {
        Self {
            cmds: StreamFifo::new(cfg.cmd_depth),
            resp: VecDeque::new(),
            depth: cfg.resp_depth,
            beats: 0,
        }
    }

    /// Address of the next beat to read, if one can be issued.
    fn request(&self) -> Option<u64> {
        let j = self.cmds.peek()?;
        (self.resp.len() < self.depth).then(|| j.cmd.beat_addr(j.next))
    }

    fn qos(&self) -> u8 {
        self.cmds.peek().map_or(0, |j| j.cmd.attrs.qos)
    }

    fn issue(&mut self, storage: &Storage, ready_at: u64) {
        let j = self.cmds.peek_mut().expect("read request without command");
        let addr = j.cmd.beat_addr(j.next);
        let wb = storage.word_bytes as u64;
        let data = if j.resp == Resp::Okay {
            storage.read_word(addr - addr % wb)
        } else {
            Bytes::from(vec![0u8; storage.word_bytes])
        };
        j.next += 1;
        let last = j.next == j.cmd.beats();
        let beat = ResponseBeat {
            id: j.cmd.id,
            data,
            resp: j.resp,
            last,
            tag: j.cmd.tag,
        };
        self.resp.push_back((ready_at, beat));
        self.beats += 1;
        if last {
            self.cmds.pop();
        }
    }

    fn out(&self, cycle: u64) -> Option<ResponseBeat> {
        self.resp.front().filter(|(t, _)| *t <= cycle).map(|(_, b)| b.clone())
    }

    fn busy(&self) -> bool {
        !self.cmds.is_empty() || !self.resp.is_empty()
    }
}

/// Pairs write commands with buffered data beats.
#[derive(Debug, Clone)]
struct WriteCore {
    cmds: StreamFifo<Job>,
    data: StreamFifo<DataBeat>,
    resp: VecDeque<(u64, ResponseBeat)>,
    depth: usize,
    beats: u64,
}

impl WriteCore {
    fn new(cfg: &MemConfig) -> Self {
        Self {
            cmds: StreamFifo::new(cfg.cmd_depth),
            data: StreamFifo::new(2),
            resp: VecDeque::new(),
            depth: cfg.resp_depth,
            beats: 0,
        }
    }

    fn request(&self) -> Option<u64> {
        let j = self.cmds.peek()?;
        self.data.peek()?;
        (self.resp.len() < self.depth).then(|| j.cmd.beat_addr(j.next))
    }

    fn burst_open(&self) -> bool {
        self.cmds.peek().is_some_and(|j| j.next > 0)
    }

    fn qos(&self) -> u8 {
        self.cmds.peek().map_or(0, |j| j.cmd.attrs.qos)
    }

    fn issue(&mut self, storage: &mut Storage, ready_at: u64, ctx: &mut Ctx<'_>) {
        let beat = self.data.pop().expect("write request without data");
        let j = self.cmds.peek_mut().expect("write request without command");
        let slot = beat_slot(&j.cmd, j.next, storage.word_bytes);
        if j.resp == Resp::Okay {
            let addr = slot.addr;
            let strb = beat.strb & lane_mask(slot.lanes);
            storage.write_word(addr - addr % storage.word_bytes as u64, &beat.data, strb);
        }
        j.next += 1;
        let last = j.next == j.cmd.beats();
        if beat.last != last {
            ctx.report(
                crate::protocol::Rule::Burst,
                format!("write {:#x}: last flag on beat {} of {}", j.cmd.tag, j.next, j.cmd.beats()),
            );
        }
        self.beats += 1;
        if last {
            self.resp.push_back((ready_at, ResponseBeat::write(j.cmd.id, j.resp, j.cmd.tag)));
            self.cmds.pop();
        }
    }

    fn out(&self, cycle: u64) -> Option<ResponseBeat> {
        self.resp.front().filter(|(t, _)| *t <= cycle).map(|(_, b)| b.clone())
    }

    fn busy(&self) -> bool {
        !self.cmds.is_empty() || !self.data.is_empty() || !self.resp.is_empty()
    }
}

fn job(cfg: &MemConfig, cmd: &Command) -> Job {
    let inside = cmd.addr >= cfg.base && cmd.end_addr() <= cfg.base.saturating_add(cfg.size);
    Job {
        cmd: *cmd,
        next: 0,
        resp: if inside { Resp::Okay } else { Resp::SlaveError },
    }
}

/// Counters exposed by the memory controllers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MemStats {
    pub read_beats: u64,
    pub write_beats: u64,
    /// Cycles in which one core lost a bank to the other.
    pub conflicts: u64,
}

macro_rules! common_ports {
    () => {
        fn slave_ports(&self) -> Vec<PortSpec> {
            vec![PortSpec::new(self.cfg.data_bytes, self.cfg.id_bits)]
        }

        fn master_ports(&self) -> Vec<PortSpec> {
            vec![]
        }
    };
}

fn drive_common(io: &mut Io<'_>, rd: &ReadCore, wr: &WriteCore) {
    let cycle = io.cycle();
    io.s_set_ar_ready(0, rd.cmds.ready());
    io.s_set_aw_ready(0, wr.cmds.ready());
    io.s_set_w_ready(0, wr.data.ready());
    io.s_drive_r(0, rd.out(cycle));
    io.s_drive_b(0, wr.out(cycle));
}

/// Memory controller that performs one read or one write per cycle on a
/// single SRAM bank.
#[derive(Debug, Clone)]
pub struct SimplexMem {
    cfg: MemConfig,
    storage: Storage,
    rd: ReadCore,
    wr: WriteCore,
    last: Access,
}

impl SimplexMem {
    pub fn new(cfg: MemConfig) -> Result<Self, ConfigError> {
        cfg.validate(false)?;
        Ok(Self {
            storage: Storage::new(cfg.data_bytes, cfg.base, 1, cfg.init),
            rd: ReadCore::new(&cfg),
            wr: WriteCore::new(&cfg),
            last: Access::Idle,
            cfg,
        })
    }

    pub fn config(&self) -> &MemConfig {
        &self.cfg
    }

    pub fn stats(&self) -> MemStats {
        MemStats {
            read_beats: self.rd.beats,
            write_beats: self.wr.beats,
            conflicts: 0,
        }
    }

    pub fn peek(&self, addr: u64) -> u8 {
        self.storage.peek(addr)
    }

    pub fn poke(&mut self, addr: u64, v: u8) {
        self.storage.poke(addr, v)
    }
}

impl Component for SimplexMem {
    fn kind(&self) -> &'static str {
        "mem_simplex"
    }

    common_ports!();

    fn eval(&mut self, io: &mut Io<'_>) {
        drive_common(io, &self.rd, &self.wr);
    }

    fn commit(&mut self, io: &Io<'_>, ctx: &mut Ctx<'_>) {
        let ready_at = io.cycle() + 1 + self.cfg.extra_latency;
        if io.s_r_fire(0).is_some() {
            self.rd.resp.pop_front();
        }
        if io.s_b_fire(0).is_some() {
            self.wr.resp.pop_front();
        }
        let pick = simplex_arbitrate(
            self.rd.request().is_some(),
            self.wr.request().is_some(),
            self.wr.burst_open(),
            (self.rd.qos(), self.wr.qos()),
            self.last,
            self.cfg.prioritize_writes,
        );
        match pick {
            Access::Read => self.rd.issue(&self.storage, ready_at),
            Access::Write => self.wr.issue(&mut self.storage, ready_at, ctx),
            Access::Idle => {}
        }
        if pick != Access::Idle {
            self.last = pick;
        }
        if let Some(c) = io.s_ar_fire(0) {
            let _ = self.rd.cmds.push(job(&self.cfg, c));
        }
        if let Some(c) = io.s_aw_fire(0) {
            let _ = self.wr.cmds.push(job(&self.cfg, c));
        }
        if let Some(w) = io.s_w_fire(0) {
            let _ = self.wr.data.push(w.clone());
        }
    }

    fn busy(&self) -> bool {
        self.rd.busy() || self.wr.busy()
    }

    fn describe(&self) -> String {
        format!(
            "reads {} rresp {} writes {} wdata {} bresp {}",
            self.rd.cmds.len(),
            self.rd.resp.len(),
            self.wr.cmds.len(),
            self.wr.data.len(),
            self.wr.resp.len()
        )
    }
}

/// Memory controller with a dedicated read core and write core sharing
/// `banks` word-interleaved SRAM banks. A bank conflict stalls the core
/// that loses round-robin arbitration.
#[derive(Debug, Clone)]
pub struct DuplexMem {
    cfg: MemConfig,
    storage: Storage,
    rd: ReadCore,
    wr: WriteCore,
    /// Core that wins the next conflict.
    favor_write: bool,
    conflicts: u64,
}

impl DuplexMem {
    pub fn new(cfg: MemConfig) -> Result<Self, ConfigError> {
        cfg.validate(true)?;
        Ok(Self {
            storage: Storage::new(cfg.data_bytes, cfg.base, cfg.banks, cfg.init),
            rd: ReadCore::new(&cfg),
            wr: WriteCore::new(&cfg),
            favor_write: false,
            conflicts: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &MemConfig {
        &self.cfg
    }

    pub fn stats(&self) -> MemStats {
        MemStats {
            read_beats: self.rd.beats,
            write_beats: self.wr.beats,
            conflicts: self.conflicts,
        }
    }

    pub fn peek(&self, addr: u64) -> u8 {
        self.storage.peek(addr)
    }

    pub fn poke(&mut self, addr: u64, v: u8) {
        self.storage.poke(addr, v)
    }
}

impl Component for DuplexMem {
    fn kind(&self) -> &'static str {
        "mem_duplex"
    }

    common_ports!();

    fn eval(&mut self, io: &mut Io<'_>) {
        drive_common(io, &self.rd, &self.wr);
    }

    fn commit(&mut self, io: &Io<'_>, ctx: &mut Ctx<'_>) {
        let ready_at = io.cycle() + 1 + self.cfg.extra_latency;
        if io.s_r_fire(0).is_some() {
            self.rd.resp.pop_front();
        }
        if io.s_b_fire(0).is_some() {
            self.wr.resp.pop_front();
        }
        let r = self.rd.request();
        let w = self.wr.request();
        let (mut do_r, mut do_w) = (r.is_some(), w.is_some());
        if let (Some(ra), Some(wa)) = (r, w) {
            let in_range = |a: u64| a >= self.cfg.base && a < self.cfg.base.saturating_add(self.cfg.size);
            if in_range(ra) && in_range(wa) && self.storage.bank_of(ra).0 == self.storage.bank_of(wa).0 {
                self.conflicts += 1;
                if self.favor_write {
                    do_r = false;
                } else {
                    do_w = false;
                }
                self.favor_write = !self.favor_write;
            }
        }
        if do_r {
            self.rd.issue(&self.storage, ready_at);
        }
        if do_w {
            self.wr.issue(&mut self.storage, ready_at, ctx);
        }
        if let Some(c) = io.s_ar_fire(0) {
            let _ = self.rd.cmds.push(job(&self.cfg, c));
        }
        if let Some(c) = io.s_aw_fire(0) {
            let _ = self.wr.cmds.push(job(&self.cfg, c));
        }
        if let Some(w) = io.s_w_fire(0) {
            let _ = self.wr.data.push(w.clone());
        }
    }

    fn busy(&self) -> bool {
        self.rd.busy() || self.wr.busy()
    }

    fn describe(&self) -> String {
        format!(
            "reads {} rresp {} writes {} wdata {} bresp {}",
            self.rd.cmds.len(),
            self.rd.resp.len(),
            self.wr.cmds.len(),
            self.wr.data.len(),
            self.wr.resp.len()
        )
    }
}

#[derive(Debug, Clone)]
struct Pending {
    cmd: Command,
    due: u64,
    resp: Resp,
    sent: usize,
}

/// Behavioral endpoint with a random latency per transaction. Responses of
/// different IDs may overtake each other; responses of one ID stay in
/// order. Read bursts are returned without interleaving.
#[derive(Debug, Clone)]
pub struct LatencyMem {
    cfg: MemConfig,
    latency: (u64, u64),
    rng: ChaCha8Rng,
    storage: Storage,
    reads: HashMap<u32, VecDeque<Pending>>,
    writes: HashMap<u32, VecDeque<Pending>>,
    /// Write commands waiting for their data, in command order.
    wdata: VecDeque<(Command, usize, Resp)>,
    outstanding: usize,
    max_outstanding: usize,
    read_ids: Vec<u32>,
    write_ids: Vec<u32>,
    r_cur: Option<u32>,
    r_beat: Option<ResponseBeat>,
    b_beat: Option<ResponseBeat>,
    rr: usize,
    data_snap: Option<Vec<Bytes>>,
}

impl LatencyMem {
    pub fn new(cfg: MemConfig, latency: (u64, u64), max_outstanding: usize, seed: u64) -> Result<Self, ConfigError> {
        cfg.validate(false)?;
        if latency.0 < 1 || latency.0 > latency.1 {
            return Err(ConfigError::invalid("latency range must satisfy 1 <= min <= max"));
        }
        Ok(Self {
            storage: Storage::new(cfg.data_bytes, cfg.base, 1, cfg.init),
            cfg,
            latency,
            rng: ChaCha8Rng::seed_from_u64(seed),
            reads: HashMap::new(),
            writes: HashMap::new(),
            wdata: VecDeque::new(),
            outstanding: 0,
            max_outstanding: max_outstanding.max(1),
            read_ids: Vec::new(),
            write_ids: Vec::new(),
            r_cur: None,
            r_beat: None,
            b_beat: None,
            rr: 0,
            data_snap: None,
        })
    }

    pub fn peek(&self, addr: u64) -> u8 {
        self.storage.peek(addr)
    }

    pub fn poke(&mut self, addr: u64, v: u8) {
        self.storage.poke(addr, v)
    }

    fn pick(ids: &[u32], map: &HashMap<u32, VecDeque<Pending>>, cycle: u64, rr: usize) -> Option<u32> {
        let n = ids.len();
        (0..n)
            .map(|k| ids[(rr + k) % n])
            .find(|id| map.get(id).and_then(|q| q.front()).is_some_and(|p| p.due <= cycle))
    }

    fn next_read_beat(&mut self, cycle: u64) {
        if self.r_beat.is_some() {
            return;
        }
        let id = match self.r_cur {
            Some(id) => id,
            None => match Self::pick(&self.read_ids, &self.reads, cycle, self.rr) {
                Some(id) => {
                    self.rr = self.rr.wrapping_add(1);
                    self.r_cur = Some(id);
                    let p = self.reads[&id].front().unwrap();
                    let wb = self.storage.word_bytes as u64;
                    self.data_snap = Some(
                        (0..p.cmd.beats())
                            .map(|k| {
                                let a = p.cmd.beat_addr(k);
                                if p.resp == Resp::Okay {
                                    self.storage.read_word(a - a % wb)
                                } else {
                                    Bytes::from(vec![0u8; self.storage.word_bytes])
                                }
                            })
                            .collect(),
                    );
                    id
                }
                None => return,
            },
        };
        let p = self.reads.get_mut(&id).unwrap().front_mut().unwrap();
        let data = self.data_snap.as_ref().unwrap()[p.sent].clone();
        p.sent += 1;
        self.r_beat = Some(ResponseBeat {
            id: p.cmd.id,
            data,
            resp: p.resp,
            last: p.sent == p.cmd.beats(),
            tag: p.cmd.tag,
        });
    }

    fn next_write_resp(&mut self, cycle: u64) {
        if self.b_beat.is_some() {
            return;
        }
        if let Some(id) = Self::pick(&self.write_ids, &self.writes, cycle, self.rr) {
            self.rr = self.rr.wrapping_add(1);
            let p = self.writes.get_mut(&id).unwrap().pop_front().unwrap();
            self.b_beat = Some(ResponseBeat::write(p.cmd.id, p.resp, p.cmd.tag));
        }
    }
}

impl Component for LatencyMem {
    fn kind(&self) -> &'static str {
        "mem_latency"
    }

    common_ports!();

    fn eval(&mut self, io: &mut Io<'_>) {
        let room = self.outstanding < self.max_outstanding;
        io.s_set_ar_ready(0, room);
        io.s_set_aw_ready(0, room && self.wdata.len() < 8);
        io.s_set_w_ready(0, !self.wdata.is_empty());
        io.s_drive_r(0, self.r_beat.clone());
        io.s_drive_b(0, self.b_beat.clone());
    }

    fn commit(&mut self, io: &Io<'_>, ctx: &mut Ctx<'_>) {
        let cycle = io.cycle();
        if let Some(r) = io.s_r_fire(0) {
            if r.last {
                let id = self.r_cur.take().unwrap();
                self.reads.get_mut(&id).unwrap().pop_front();
                self.outstanding -= 1;
                self.data_snap = None;
            }
            self.r_beat = None;
        }
        if io.s_b_fire(0).is_some() {
            self.b_beat = None;
            self.outstanding -= 1;
        }
        let (lo, hi) = self.latency;
        if let Some(c) = io.s_ar_fire(0) {
            let due = cycle + self.rng.gen_range(lo..=hi);
            let j = job(&self.cfg, c);
            let id = c.id.value();
            if !self.read_ids.contains(&id) {
                self.read_ids.push(id);
            }
            self.reads.entry(id).or_default().push_back(Pending {
                cmd: *c,
                due,
                resp: j.resp,
                sent: 0,
            });
            self.outstanding += 1;
        }
        if let Some(c) = io.s_aw_fire(0) {
            let j = job(&self.cfg, c);
            self.wdata.push_back((*c, 0, j.resp));
            self.outstanding += 1;
        }
        if let Some(w) = io.s_w_fire(0) {
            let wb = self.storage.word_bytes;
            let (cmd, k, resp) = self.wdata.front_mut().unwrap();
            let slot = beat_slot(cmd, *k, wb);
            if *resp == Resp::Okay {
                let a = slot.addr;
                self.storage.write_word(a - a % wb as u64, &w.data, w.strb & lane_mask(slot.lanes));
            }
            *k += 1;
            if w.last != (*k == cmd.beats()) {
                ctx.report(crate::protocol::Rule::Burst, format!("write {:#x}: misplaced last flag", cmd.tag));
            }
            if *k == cmd.beats() {
                let (cmd, _, resp) = self.wdata.pop_front().unwrap();
                let due = cycle + self.rng.gen_range(lo..=hi);
                let id = cmd.id.value();
                if !self.write_ids.contains(&id) {
                    self.write_ids.push(id);
                }
                self.writes.entry(id).or_default().push_back(Pending { cmd, due, resp, sent: 0 });
            }
        }
        self.next_read_beat(cycle + 1);
        self.next_write_resp(cycle + 1);
    }

    fn busy(&self) -> bool {
        self.outstanding > 0
    }

    fn describe(&self) -> String {
        format!("outstanding {} awaiting data {}", self.outstanding, self.wdata.len())
    }
}

/// Byte-level backdoor shared by the memory models.
pub trait Backdoor {
    fn peek_byte(&self, addr: u64) -> u8;
    fn poke_byte(&mut self, addr: u64, v: u8);
    /// Address range served by the model.
    fn range(&self) -> (u64, u64);

    fn peek_range(&self, addr: u64, len: usize) -> Vec<u8> {
        (0..len as u64).map(|i| self.peek_byte(addr + i)).collect()
    }

    fn flip_bit(&mut self, addr: u64, bit: u8) {
        let v = self.peek_byte(addr);
        self.poke_byte(addr, v ^ (1 << (bit & 7)));
    }
}

macro_rules! backdoor {
    ($t:ty) => {
        impl Backdoor for $t {
            fn peek_byte(&self, addr: u64) -> u8 {
                self.peek(addr)
            }
            fn poke_byte(&mut self, addr: u64, v: u8) {
                self.poke(addr, v)
            }
            fn range(&self) -> (u64, u64) {
                (self.cfg.base, self.cfg.base + self.cfg.size)
            }
        }
    };
}

backdoor!(SimplexMem);
backdoor!(DuplexMem);
backdoor!(LatencyMem);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bank_routing() {
        assert_eq!(route_bank(0x40, 64, 2), (1, 0));
        assert_eq!(route_bank(0x80, 64, 2), (0, 1));
        assert_eq!(route_bank(0x0, 64, 4), (0, 0));
    }

    #[test]
    fn arbitration() {
        use Access::*;
        assert_eq!(simplex_arbitrate(true, false, false, (0, 0), Idle, true), Read);
        assert_eq!(simplex_arbitrate(true, true, true, (0, 0), Write, true), Write);
        assert_eq!(simplex_arbitrate(false, false, false, (0, 0), Idle, true), Idle);
        assert_eq!(simplex_arbitrate(true, true, false, (0, 0), Read, true), Write);
        assert_eq!(simplex_arbitrate(true, true, false, (0, 0), Write, true), Read);
        assert_eq!(simplex_arbitrate(true, true, false, (5, 1), Read, true), Read);
        assert_eq!(simplex_arbitrate(true, true, true, (0, 0), Write, false), Read);
    }

    #[test]
    fn sram_read_after_write() {
        let mut b = SramBank::new(0, 0, 1, 8, MemInit::Pattern(3));
        let mut w = [0u8; 8];
        b.read(5, &mut w);
        assert_eq!(w[0], MemInit::Pattern(3).byte(40));
        b.write(5, &[9; 8], 0b0000_0011);
        b.read(5, &mut w);
        assert_eq!(&w[..3], &[9, 9, MemInit::Pattern(3).byte(42)]);
    }

    #[test]
    fn storage_uses_absolute_addresses() {
        for banks in [1, 2, 4] {
            let mut s = Storage::new(8, 0x1000, banks, MemInit::Pattern(7));
            for a in 0x1000..0x1100u64 {
                assert_eq!(s.peek(a), MemInit::Pattern(7).byte(a), "banks {banks} addr {a:#x}");
            }
            s.poke(0x1013, 0xAB);
            assert_eq!(s.peek(0x1013), 0xAB);
            assert_eq!(s.peek(0x1012), MemInit::Pattern(7).byte(0x1012));
        }
    }

    #[test]
    fn pattern_varies() {
        let p = MemInit::Pattern(1);
        let distinct: std::collections::HashSet<u8> = (0..256).map(|a| p.byte(a)).collect();
        assert!(distinct.len() > 100);
    }
}
