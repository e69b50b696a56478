//! DMA engine backend: splits 1D transfers into burst pairs, issues reads
//! and writes on one master port, and realigns the data between them.

use std::collections::VecDeque;

use bytes::Bytes;

use crate::kernel::{Component, Ctx, Io, PortSpec};
use crate::protocol::{lane_mask, Command, DataBeat, Dir, Rule, TransactionId, BOUNDARY_BYTES, MAX_BURST_BEATS};
use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transfer1D {
    pub src: u64,
    pub dst: u64,
    pub len: u64,
}

/// One read burst and the write burst that stores its bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BurstPair {
    pub read: Command,
    pub write: Command,
    pub src: u64,
    pub dst: u64,
    pub bytes: u64,
}

fn beats_for(addr: u64, bytes: u64, width: u64) -> u64 {
    (addr % width + bytes).div_ceil(width)
}

/// Splits a transfer so that no burst crosses `boundary` or exceeds
/// `max_beats` on either side.
pub fn reshape(t: Transfer1D, width: usize, max_beats: usize, boundary: u64, id: TransactionId) -> Vec<BurstPair> {
    let w = width as u64;
    let max_bytes = max_beats as u64 * w;
    let mut out = Vec::new();
    let (mut src, mut dst, mut left) = (t.src, t.dst, t.len);
    while left > 0 {
        let bytes = left
            .min(boundary - src % boundary)
            .min(boundary - dst % boundary)
            .min(max_bytes - src % w)
            .min(max_bytes - dst % w);
        let rb = beats_for(src, bytes, w);
        let wb = beats_for(dst, bytes, w);
        out.push(BurstPair {
            read: Command::new(Dir::Read, src, (rb - 1) as u8, w, id),
            write: Command::new(Dir::Write, dst, (wb - 1) as u8, w, id),
            src,
            dst,
            bytes,
        });
        src += bytes;
        dst += bytes;
        left -= bytes;
    }
    out
}

/// Byte lanes of beat `k` of a burst that starts at `addr` and carries
/// `bytes` bytes.
pub fn job_lanes(addr: u64, bytes: u64, k: usize, width: usize) -> std::ops::Range<usize> {
    let w = width as u64;
    let first = addr % w;
    let end = first + bytes;
    let lo = if k == 0 { first } else { k as u64 * w };
    let hi = end.min((k as u64 + 1) * w);
    (lo - k as u64 * w) as usize..(hi - k as u64 * w) as usize
}

/// Converts a stream of read beats into write beats: bytes keep their
/// order and move from source lanes to destination lanes.
pub fn realign(reads: &[Bytes], src: u64, dst: u64, len: u64, width: usize) -> Vec<(Vec<u8>, u128)> {
    let mut fifo = VecDeque::new();
    for (k, beat) in reads.iter().enumerate() {
        fifo.extend(&beat[job_lanes(src, len, k, width)]);
    }
    let beats = beats_for(dst, len, width as u64) as usize;
    (0..beats)
        .map(|k| {
            let lanes = job_lanes(dst, len, k, width);
            let mut data = vec![0; width];
            for l in lanes.clone() {
                data[l] = fifo.pop_front().expect("realign ran out of bytes");
            }
            (data, lane_mask(lanes))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobKind {
    Copy(Transfer1D),
    /// Occupies the engine's frontend for this many cycles without traffic.
    Compute(u64),
}

/// A frontend request. It starts once `dep` has completed and `delay`
/// further cycles have passed (counted from cycle 0 without `dep`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Job {
    pub id: u64,
    pub kind: JobKind,
    pub delay: u64,
    pub dep: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub id: u64,
    pub start: u64,
    pub end: u64,
    pub errors: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DmaConfig {
    pub data_bytes: usize,
    pub id_bits: u8,
    pub id: u32,
    pub max_outstanding: usize,
    /// Realignment buffer. Read bursts are capped at half of it so that one
    /// can fill while the previous one drains.
    pub buffer_beats: usize,
    pub max_beats: usize,
    pub boundary: u64,
}

impl DmaConfig {
    pub fn new(data_bytes: usize, id_bits: u8) -> Self {
        Self {
            data_bytes,
            id_bits,
            id: 0,
            max_outstanding: 8,
            buffer_beats: 64,
            max_beats: MAX_BURST_BEATS,
            boundary: BOUNDARY_BYTES,
        }
    }
}

#[derive(Debug, Clone)]
struct Pair {
    p: BurstPair,
    job: u64,
    /// Read beats received.
    r_beats: usize,
    /// Write beats sent.
    w_beats: usize,
    aw_sent: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DmaStats {
    pub bytes: u64,
    pub r_beats: u64,
    pub w_beats: u64,
    pub first_cycle: Option<u64>,
    pub last_cycle: Option<u64>,
}

#[derive(Debug, Clone)]
struct Active {
    id: u64,
    start: u64,
    left: usize,
    errors: u32,
}

/// DMA engine with a single master port and a single transaction ID.
pub struct Dma {
    cfg: DmaConfig,
    id: TransactionId,
    jobs: VecDeque<Job>,
    /// Job whose pairs are still being generated into `pairs`, or a compute
    /// job finishing at the given cycle.
    compute_until: Option<(u64, u64, u64)>,
    active: Vec<Active>,
    /// Pairs whose read command has not been sent.
    to_read: VecDeque<Pair>,
    /// Pairs with the read command sent and write response outstanding, in
    /// order.
    inflight: VecDeque<Pair>,
    /// Index into `inflight` of the pair receiving read data.
    r_pair: usize,
    /// Index into `inflight` of the pair sending write data.
    w_pair: usize,
    /// Bytes of pairs whose write command is out but whose data is not.
    committed: u64,
    /// Buffer bytes promised to issued reads and not yet written out. Read
    /// data is always accepted, so a stalled write never blocks the shared
    /// response path of other engines.
    reserved: u64,
    fifo: VecDeque<u8>,
    done: std::collections::HashMap<u64, u64>,
    completions: Vec<Completion>,
    stats: DmaStats,
    stopped: bool,
}

impl Dma {
    pub fn new(cfg: DmaConfig) -> Result<Self, ConfigError> {
        if !cfg.data_bytes.is_power_of_two() || cfg.data_bytes > crate::protocol::MAX_DATA_BYTES {
            return Err(ConfigError::invalid(format!("DMA data width {} unsupported", cfg.data_bytes)));
        }
        if cfg.max_outstanding == 0 || cfg.buffer_beats < 2 {
            return Err(ConfigError::invalid("DMA needs one outstanding pair and a buffer of two beats"));
        }
        if !(1..=MAX_BURST_BEATS).contains(&cfg.max_beats)
            || !cfg.boundary.is_power_of_two()
            || cfg.boundary > BOUNDARY_BYTES
            || cfg.boundary < cfg.data_bytes as u64
        {
            return Err(ConfigError::invalid("DMA burst limits out of range"));
        }
        let id = TransactionId::new(cfg.id, cfg.id_bits)?;
        Ok(Self {
            cfg,
            id,
            jobs: VecDeque::new(),
            compute_until: None,
            active: Vec::new(),
            to_read: VecDeque::new(),
            inflight: VecDeque::new(),
            r_pair: 0,
            w_pair: 0,
            committed: 0,
            reserved: 0,
            fifo: VecDeque::with_capacity(cfg.buffer_beats * cfg.data_bytes),
            done: Default::default(),
            completions: Vec::new(),
            stats: DmaStats::default(),
            stopped: false,
        })
    }

    pub fn config(&self) -> &DmaConfig {
        &self.cfg
    }

    pub fn submit(&mut self, job: Job) {
        self.jobs.push_back(job);
    }

    /// Queues a copy that starts as soon as possible.
    pub fn copy(&mut self, id: u64, t: Transfer1D) {
        self.submit(Job {
            id,
            kind: JobKind::Copy(t),
            delay: 0,
            dep: None,
        });
    }

    pub fn completions(&self) -> &[Completion] {
        &self.completions
    }

    pub fn stats(&self) -> &DmaStats {
        &self.stats
    }

    /// Jobs not started yet, in submission order.
    pub fn queued_jobs(&self) -> impl Iterator<Item = &Job> {
        self.jobs.iter()
    }

    pub fn pending_jobs(&self) -> usize {
        self.jobs.len() + self.active.len() + self.compute_until.is_some() as usize
    }

    fn capacity(&self) -> usize {
        self.cfg.buffer_beats * self.cfg.data_bytes
    }

    fn ar(&self) -> Option<Command> {
        let p = self.to_read.front()?;
        (self.inflight.len() < self.cfg.max_outstanding && self.reserved + p.p.bytes <= self.capacity() as u64)
            .then_some(p.p.read)
    }

    /// Pair whose write command goes next.
    fn aw_pair(&self) -> Option<&Pair> {
        self.inflight.iter().find(|p| !p.aw_sent)
    }

    fn aw(&self) -> Option<Command> {
        let p = self.aw_pair()?;
        let first = job_lanes(p.p.dst, p.p.bytes, 0, self.cfg.data_bytes).len() as u64;
        (self.fifo.len() as u64 >= self.committed + first).then_some(p.p.write)
    }

    fn w(&self) -> Option<DataBeat> {
        let p = self.inflight.get(self.w_pair).filter(|p| p.aw_sent)?;
        let d = self.cfg.data_bytes;
        let lanes = job_lanes(p.p.dst, p.p.bytes, p.w_beats, d);
        if self.fifo.len() < lanes.len() {
            return None;
        }
        let mut data = vec![0u8; d];
        for (i, l) in lanes.clone().enumerate() {
            data[l] = self.fifo[i];
        }
        Some(DataBeat {
            data: Bytes::from(data),
            strb: lane_mask(lanes),
            last: p.w_beats == p.p.write.len as usize,
            tag: p.p.write.tag,
        })
    }

    fn start_jobs(&mut self, cycle: u64) {
        if let Some((id, start, end)) = self.compute_until {
            if cycle < end {
                return;
            }
            self.finish(id, start, cycle, 0);
            self.compute_until = None;
        }
        while let Some(j) = self.jobs.front() {
            // Jobs are split into bursts only when the burst queue runs low,
            // so that stopping leaves little work behind.
            if self.to_read.len() >= self.cfg.max_outstanding {
                return;
            }
            let base = match j.dep {
                None => 0,
                Some(d) => match self.done.get(&d) {
                    Some(&c) => c,
                    None => return,
                },
            };
            if cycle < base + j.delay {
                return;
            }
            let j = self.jobs.pop_front().unwrap();
            self.stats.first_cycle.get_or_insert(cycle);
            match j.kind {
                JobKind::Compute(n) => {
                    self.compute_until = Some((j.id, cycle, cycle + n));
                    return;
                }
                JobKind::Copy(t) if t.len == 0 => self.finish(j.id, cycle, cycle, 0),
                JobKind::Copy(t) => {
                    let beats = self.cfg.max_beats.min(self.cfg.buffer_beats / 2);
                    let pairs = reshape(t, self.cfg.data_bytes, beats, self.cfg.boundary, self.id);
                    self.active.push(Active {
                        id: j.id,
                        start: cycle,
                        left: pairs.len(),
                        errors: 0,
                    });
                    for (k, p) in pairs.into_iter().enumerate() {
                        let tag = (j.id << 20) | k as u64;
                        let mut p = p;
                        p.read.tag = tag;
                        p.write.tag = tag;
                        self.to_read.push_back(Pair {
                            p,
                            job: j.id,
                            r_beats: 0,
                            w_beats: 0,
                            aw_sent: false,
                        });
                    }
                }
            }
        }
    }

    fn finish(&mut self, id: u64, start: u64, end: u64, errors: u32) {
        self.done.insert(id, end);
        self.completions.push(Completion { id, start, end, errors });
        self.stats.last_cycle = Some(end);
    }
}

impl Component for Dma {
    fn kind(&self) -> &'static str {
        "dma"
    }

    fn slave_ports(&self) -> Vec<PortSpec> {
        vec![]
    }

    fn master_ports(&self) -> Vec<PortSpec> {
        vec![PortSpec::new(self.cfg.data_bytes, self.cfg.id_bits)]
    }

    fn eval(&mut self, io: &mut Io<'_>) {
        io.m_drive_ar(0, self.ar());
        io.m_set_r_ready(0, true);
        io.m_drive_aw(0, self.aw());
        io.m_drive_w(0, self.w());
        io.m_set_b_ready(0, true);
    }

    fn commit(&mut self, io: &Io<'_>, ctx: &mut Ctx<'_>) {
        let d = self.cfg.data_bytes;
        if let Some(r) = io.m_r_fire(0) {
            match self.inflight.get_mut(self.r_pair) {
                Some(p) => {
                    let lanes = job_lanes(p.p.src, p.p.bytes, p.r_beats, d);
                    self.fifo.extend(&r.data[lanes]);
                    debug_assert!(self.fifo.len() <= self.cfg.buffer_beats * d);
                    if r.resp.is_error() {
                        let job = p.job;
                        if let Some(a) = self.active.iter_mut().find(|a| a.id == job) {
                            a.errors += 1;
                        }
                    }
                    p.r_beats += 1;
                    self.stats.r_beats += 1;
                    if p.r_beats == p.p.read.beats() {
                        self.r_pair += 1;
                    }
                }
                None => ctx.report(Rule::Orphan, "read data without an outstanding read"),
            }
        }
        if io.m_w_fire(0).is_some() {
            let p = &mut self.inflight[self.w_pair];
            let n = job_lanes(p.p.dst, p.p.bytes, p.w_beats, d).len();
            self.fifo.drain(..n);
            self.committed -= n as u64;
            self.reserved -= n as u64;
            self.stats.bytes += n as u64;
            self.stats.w_beats += 1;
            p.w_beats += 1;
            if p.w_beats == p.p.write.beats() {
                self.w_pair += 1;
            }
        }
        if io.m_aw_fire(0).is_some() {
            let i = self.inflight.iter().position(|p| !p.aw_sent).unwrap();
            self.inflight[i].aw_sent = true;
            self.committed += self.inflight[i].p.bytes;
        }
        if let Some(b) = io.m_b_fire(0) {
            let err = b.resp.is_error();
            match self.inflight.front() {
                Some(p) if p.w_beats == p.p.write.beats() => {
                    let job = p.job;
                    self.inflight.pop_front();
                    self.r_pair -= 1;
                    self.w_pair -= 1;
                    let i = self.active.iter().position(|a| a.id == job).unwrap();
                    let a = &mut self.active[i];
                    a.left -= 1;
                    a.errors += err as u32;
                    if a.left == 0 {
                        let a = self.active.remove(i);
                        self.finish(a.id, a.start, ctx.cycle, a.errors);
                    }
                }
                _ => ctx.report(Rule::Orphan, "write response before write data"),
            }
        }
        if io.m_ar_fire(0).is_some() {
            let p = self.to_read.pop_front().unwrap();
            self.reserved += p.p.bytes;
            self.inflight.push_back(p);
        }
        if !self.stopped {
            self.start_jobs(ctx.cycle + 1);
        }
    }

    fn busy(&self) -> bool {
        !self.inflight.is_empty()
            || !self.to_read.is_empty()
            || (!self.stopped && (!self.jobs.is_empty() || self.compute_until.is_some()))
    }

    fn stop(&mut self) {
        self.stopped = true;
    }

    fn describe(&self) -> String {
        format!(
            "jobs {} to read {} in flight {} buffer {}B committed {}B",
            self.jobs.len(),
            self.to_read.len(),
            self.inflight.len(),
            self.fifo.len(),
            self.committed
        )
    }
}
