//! Data width converters. The upsizer packs narrow beats into wide ones and
//! serializes wide read data back through parallel read slots; the
//! downsizer splits wide bursts into narrow ones and merges their responses.

use std::collections::VecDeque;

use bytes::Bytes;

use crate::kernel::{Chan, CombPath, Component, Ctx, Io, PortSpec, RrArbiter, Side, Signal};
use crate::protocol::{lane_mask, beat_slot, Command, DataBeat, Resp, ResponseBeat, Rule, TransactionId, MAX_DATA_BYTES};
use crate::ConfigError;

/// Wide command covering the bytes of a narrow one. Commands that may not
/// be modified pass through unchanged.
pub fn upsize_command(cmd: &Command, wide_bytes: usize) -> Command {
    if !cmd.attrs.modifiable {
        return *cmd;
    }
    let w = wide_bytes as u64;
    let start = cmd.addr & !(w - 1);
    let words = (cmd.end_addr() - start).div_ceil(w);
    Command {
        size: w,
        len: (words - 1) as u8,
        ..*cmd
    }
}

/// Narrow bursts covering the bytes of a wide command, in address order,
/// each at most `max_len` beats. Commands whose beats already fit the
/// narrow bus pass through.
pub fn downsize_command(cmd: &Command, narrow_bytes: usize, max_len: usize) -> Vec<Command> {
    let n = narrow_bytes as u64;
    if cmd.size <= n {
        return vec![*cmd];
    }
    let start = cmd.addr & !(n - 1);
    let total = (cmd.end_addr() - start).div_ceil(n) as usize;
    let mut out = Vec::with_capacity(total.div_ceil(max_len));
    let mut done = 0;
    while done < total {
        let beats = (total - done).min(max_len);
        let addr = if done == 0 { cmd.addr } else { start + done as u64 * n };
        out.push(Command {
            addr,
            size: n,
            len: (beats - 1) as u8,
            ..*cmd
        });
        done += beats;
    }
    out
}

/// Read slot for a new transaction: the slot already serving `id`, else
/// the lowest idle one.
pub fn assign_read_upsizer(active: &[Option<TransactionId>], id: TransactionId) -> Option<usize> {
    active
        .iter()
        .position(|a| *a == Some(id))
        .or_else(|| active.iter().position(Option::is_none))
}

fn check_widths(narrow: usize, wide: usize) -> Result<(), ConfigError> {
    if !narrow.is_power_of_two() || !wide.is_power_of_two() || wide > MAX_DATA_BYTES || narrow >= wide {
        return Err(ConfigError::invalid(format!(
            "width conversion {narrow} -> {wide} bytes needs powers of two with narrow < wide"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpsizerConfig {
    pub narrow_bytes: usize,
    pub wide_bytes: usize,
    pub id_bits: u8,
    pub read_slots: usize,
    /// Queued transactions per read slot (all with the same ID).
    pub slot_depth: usize,
    pub max_writes: usize,
}

impl UpsizerConfig {
    pub fn new(narrow_bytes: usize, wide_bytes: usize, id_bits: u8) -> Self {
        Self {
            narrow_bytes,
            wide_bytes,
            id_bits,
            read_slots: 2,
            slot_depth: 4,
            max_writes: 4,
        }
    }
}

#[derive(Debug, Clone)]
struct ReadConv {
    orig: Command,
    /// Narrow beat to send next.
    k: usize,
}

#[derive(Debug, Clone, Default)]
struct ReadSlot {
    id: Option<TransactionId>,
    convs: VecDeque<ReadConv>,
    wide: VecDeque<ResponseBeat>,
}

#[derive(Debug, Clone)]
struct WriteConv {
    orig: Command,
    seq: u64,
    k: usize,
}

/// Index of the wide beat holding narrow beat `k` of `orig`.
fn wide_index(orig: &Command, k: usize, wide_bytes: usize) -> usize {
    if !orig.attrs.modifiable {
        return k;
    }
    let w = wide_bytes as u64;
    (orig.beat_addr(k) / w - orig.addr / w) as usize
}

/// Narrow-to-wide converter; the slave port is narrow.
pub struct Upsizer {
    cfg: UpsizerConfig,
    ar_out: VecDeque<Command>,
    slots: Vec<ReadSlot>,
    r_arb: RrArbiter,
    r_grant: Option<usize>,
    aw_out: VecDeque<(u64, Command)>,
    aw_sent: u64,
    next_seq: u64,
    writes: VecDeque<WriteConv>,
    buf: Vec<u8>,
    buf_strb: u128,
    w_out: VecDeque<(u64, DataBeat)>,
}

const STAGE: usize = 2;

impl Upsizer {
    pub fn new(cfg: UpsizerConfig) -> Result<Self, ConfigError> {
        check_widths(cfg.narrow_bytes, cfg.wide_bytes)?;
        if cfg.read_slots == 0 || cfg.read_slots > 64 || cfg.slot_depth == 0 || cfg.max_writes == 0 {
            return Err(ConfigError::invalid("upsizer needs 1..=64 read slots and nonzero depths"));
        }
        Ok(Self {
            ar_out: VecDeque::new(),
            slots: vec![ReadSlot::default(); cfg.read_slots],
            r_arb: RrArbiter::new(cfg.read_slots),
            r_grant: None,
            aw_out: VecDeque::new(),
            aw_sent: 0,
            next_seq: 0,
            writes: VecDeque::new(),
            buf: vec![0; cfg.wide_bytes],
            buf_strb: 0,
            w_out: VecDeque::new(),
            cfg,
        })
    }

    fn slot_for(&self, id: TransactionId) -> Option<usize> {
        let active: Vec<Option<TransactionId>> = self.slots.iter().map(|s| s.id).collect();
        let i = assign_read_upsizer(&active, id)?;
        (self.slots[i].convs.len() < self.cfg.slot_depth).then_some(i)
    }

    fn narrow_beat(&self, s: usize) -> Option<ResponseBeat> {
        let slot = &self.slots[s];
        let (c, w) = (slot.convs.front()?, slot.wide.front()?);
        let n = self.cfg.narrow_bytes;
        let off = ((c.orig.beat_addr(c.k) & !(n as u64 - 1)) % self.cfg.wide_bytes as u64) as usize;
        Some(ResponseBeat {
            id: c.orig.id,
            data: w.data.slice(off..off + n),
            resp: w.resp,
            last: c.k == c.orig.len as usize,
            tag: c.orig.tag,
        })
    }

    fn read_slot_of(&self, id: TransactionId) -> Option<usize> {
        self.slots.iter().position(|s| s.id == Some(id))
    }
}

impl Component for Upsizer {
    fn kind(&self) -> &'static str {
        "upsize"
    }

    fn slave_ports(&self) -> Vec<PortSpec> {
        vec![PortSpec::new(self.cfg.narrow_bytes, self.cfg.id_bits)]
    }

    fn master_ports(&self) -> Vec<PortSpec> {
        vec![PortSpec::new(self.cfg.wide_bytes, self.cfg.id_bits)]
    }

    fn comb_paths(&self) -> Vec<CombPath> {
        let mut v = CombPath::through(Chan::B, (Side::Master, 0), (Side::Slave, 0)).to_vec();
        v.push(CombPath::new(Signal::valid(Side::Slave, 0, Chan::Ar), Signal::ready(Side::Slave, 0, Chan::Ar)));
        v.push(CombPath::new(Signal::valid(Side::Master, 0, Chan::R), Signal::ready(Side::Master, 0, Chan::R)));
        v
    }

    fn eval(&mut self, io: &mut Io<'_>) {
        // Reads.
        let ar_ready = self.ar_out.len() < STAGE && io.s_ar(0).is_some_and(|c| self.slot_for(c.id).is_some());
        io.s_set_ar_ready(0, ar_ready);
        io.m_drive_ar(0, self.ar_out.front().copied());
        let r_ready = match io.m_r(0) {
            Some(r) => self.read_slot_of(r.id).is_none_or(|s| self.slots[s].wide.len() < STAGE),
            None => false,
        };
        io.m_set_r_ready(0, r_ready);
        let mut mask = 0u64;
        for (i, s) in self.slots.iter().enumerate() {
            if !s.convs.is_empty() && !s.wide.is_empty() {
                mask |= 1 << i;
            }
        }
        self.r_grant = self.r_arb.grant(mask);
        io.s_drive_r(0, self.r_grant.and_then(|s| self.narrow_beat(s)));

        // Writes.
        let aw_ready = self.aw_out.len() < STAGE && self.writes.len() < self.cfg.max_writes;
        io.s_set_aw_ready(0, aw_ready);
        io.m_drive_aw(0, self.aw_out.front().map(|e| e.1));
        io.s_set_w_ready(0, !self.writes.is_empty() && self.w_out.len() < STAGE);
        let w = self.w_out.front().filter(|e| e.0 < self.aw_sent).map(|e| e.1.clone());
        io.m_drive_w(0, w);

        let b = io.m_b(0).cloned();
        io.s_drive_b(0, b);
        let ready = io.s_b_ready(0);
        io.m_set_b_ready(0, ready);
    }

    fn commit(&mut self, io: &Io<'_>, ctx: &mut Ctx<'_>) {
        let (n, wb) = (self.cfg.narrow_bytes, self.cfg.wide_bytes);
        // Read data.
        let fired = io.s_r_fire(0).is_some();
        self.r_arb.update(self.r_grant, fired && io.s_r_fire(0).unwrap().last);
        if let (true, Some(s)) = (fired, self.r_grant) {
            let slot = &mut self.slots[s];
            let c = slot.convs.front_mut().unwrap();
            let last = c.k == c.orig.len as usize;
            if last || wide_index(&c.orig, c.k + 1, wb) != wide_index(&c.orig, c.k, wb) {
                slot.wide.pop_front();
            }
            c.k += 1;
            if last {
                slot.convs.pop_front();
                if slot.convs.is_empty() {
                    slot.id = None;
                    debug_assert!(slot.wide.is_empty());
                }
            }
        }
        if let Some(r) = io.m_r_fire(0) {
            match self.read_slot_of(r.id) {
                Some(s) => self.slots[s].wide.push_back(r.clone()),
                None => ctx.report(Rule::Orphan, format!("wide read data for idle ID {}", r.id)),
            }
        }
        if io.m_ar_fire(0).is_some() {
            self.ar_out.pop_front();
        }
        if let Some(c) = io.s_ar_fire(0) {
            let s = self.slot_for(c.id).expect("read accepted without a slot");
            self.slots[s].id = Some(c.id);
            self.slots[s].convs.push_back(ReadConv { orig: *c, k: 0 });
            self.ar_out.push_back(upsize_command(c, wb));
        }

        // Write data.
        if io.m_w_fire(0).is_some() {
            self.w_out.pop_front();
        }
        if io.m_aw_fire(0).is_some() {
            self.aw_out.pop_front();
            self.aw_sent += 1;
        }
        if let Some(beat) = io.s_w_fire(0) {
            let c = self.writes.front_mut().expect("write data without command");
            let nb = c.orig.beat_addr(c.k) & !(n as u64 - 1);
            let off = (nb % wb as u64) as usize;
            for lane in 0..n {
                if beat.strb >> lane & 1 == 1 {
                    self.buf[off + lane] = beat.data[lane];
                    self.buf_strb |= 1 << (off + lane);
                }
            }
            let last = c.k == c.orig.len as usize;
            if beat.last != last {
                ctx.report(Rule::Burst, format!("write {:#x}: last flag on beat {}", c.orig.tag, c.k));
            }
            if last || wide_index(&c.orig, c.k + 1, wb) != wide_index(&c.orig, c.k, wb) {
                let data = Bytes::from(std::mem::replace(&mut self.buf, vec![0; wb]));
                let strb = std::mem::take(&mut self.buf_strb);
                self.w_out.push_back((
                    c.seq,
                    DataBeat {
                        data,
                        strb,
                        last,
                        tag: c.orig.tag,
                    },
                ));
            }
            c.k += 1;
            if last {
                self.writes.pop_front();
            }
        }
        if let Some(c) = io.s_aw_fire(0) {
            let seq = self.next_seq;
            self.next_seq += 1;
            self.aw_out.push_back((seq, upsize_command(c, wb)));
            self.writes.push_back(WriteConv { orig: *c, seq, k: 0 });
        }
    }

    fn busy(&self) -> bool {
        !self.ar_out.is_empty()
            || self.slots.iter().any(|s| s.id.is_some())
            || !self.aw_out.is_empty()
            || !self.writes.is_empty()
            || !self.w_out.is_empty()
    }

    fn describe(&self) -> String {
        let slots: Vec<usize> = self.slots.iter().map(|s| s.convs.len()).collect();
        format!(
            "ar {} slots {:?} aw {} writes {} w {}",
            self.ar_out.len(),
            slots,
            self.aw_out.len(),
            self.writes.len(),
            self.w_out.len()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DownsizerConfig {
    pub wide_bytes: usize,
    pub narrow_bytes: usize,
    pub id_bits: u8,
    pub max_writes: usize,
}

impl DownsizerConfig {
    pub fn new(wide_bytes: usize, narrow_bytes: usize, id_bits: u8) -> Self {
        Self {
            wide_bytes,
            narrow_bytes,
            id_bits,
            max_writes: 4,
        }
    }
}

/// Beat of `orig` (on its own bus) that holds the byte at `addr`.
fn orig_beat(orig: &Command, addr: u64) -> usize {
    if orig.len == 0 || addr < orig.beat_addr(1) {
        0
    } else {
        ((addr - orig.aligned_addr()) / orig.size) as usize
    }
}

/// Position within a list of narrow bursts.
#[derive(Debug, Clone, Copy, Default)]
struct Cursor {
    sub: usize,
    beat: usize,
}

impl Cursor {
    fn addr(self, subs: &[Command]) -> u64 {
        subs[self.sub].beat_addr(self.beat)
    }

    fn is_sub_last(self, subs: &[Command]) -> bool {
        self.beat == subs[self.sub].len as usize
    }

    fn is_last(self, subs: &[Command]) -> bool {
        self.sub + 1 == subs.len() && self.is_sub_last(subs)
    }

    fn next(self, subs: &[Command]) -> Cursor {
        if self.is_sub_last(subs) {
            Cursor {
                sub: self.sub + 1,
                beat: 0,
            }
        } else {
            Cursor {
                sub: self.sub,
                beat: self.beat + 1,
            }
        }
    }
}

#[derive(Debug, Clone)]
struct DownWrite {
    orig: Command,
    subs: Vec<Command>,
    /// Global sequence number of the first narrow command.
    first_seq: u64,
    w: Cursor,
    b_left: usize,
    resp: Resp,
}

#[derive(Debug, Clone)]
struct DownRead {
    orig: Command,
    subs: Vec<Command>,
    ar_sent: usize,
    r: Cursor,
    buf: Vec<u8>,
    resp: Resp,
}

/// Wide-to-narrow converter; the slave port is wide. Handles one read at a
/// time.
pub struct Downsizer {
    cfg: DownsizerConfig,
    read: Option<DownRead>,
    r_out: VecDeque<ResponseBeat>,
    writes: VecDeque<DownWrite>,
    aw_out: VecDeque<Command>,
    aw_seq: u64,
    aw_sent: u64,
    w_in: VecDeque<DataBeat>,
    b_out: VecDeque<ResponseBeat>,
}

impl Downsizer {
    pub fn new(cfg: DownsizerConfig) -> Result<Self, ConfigError> {
        check_widths(cfg.narrow_bytes, cfg.wide_bytes)?;
        if cfg.max_writes == 0 {
            return Err(ConfigError::invalid("downsizer needs room for one write"));
        }
        Ok(Self {
            read: None,
            r_out: VecDeque::new(),
            writes: VecDeque::new(),
            aw_out: VecDeque::new(),
            aw_seq: 0,
            aw_sent: 0,
            w_in: VecDeque::new(),
            b_out: VecDeque::new(),
            cfg,
        })
    }

    /// Narrow write beat to send, if its command has gone out.
    fn narrow_w(&self) -> Option<DataBeat> {
        let wide = self.w_in.front()?;
        let wr = self.writes.iter().find(|w| w.w.sub < w.subs.len())?;
        if wr.first_seq + wr.w.sub as u64 >= self.aw_sent {
            return None;
        }
        let n = self.cfg.narrow_bytes;
        let slot = beat_slot(&wr.subs[wr.w.sub], wr.w.beat, n);
        let off = ((slot.addr & !(n as u64 - 1)) % self.cfg.wide_bytes as u64) as usize;
        let strb = (wide.strb >> off) & lane_mask(slot.lanes);
        Some(DataBeat {
            data: wide.data.slice(off..off + n),
            strb,
            last: wr.w.is_sub_last(&wr.subs),
            tag: wide.tag,
        })
    }
}

impl Component for Downsizer {
    fn kind(&self) -> &'static str {
        "downsize"
    }

    fn slave_ports(&self) -> Vec<PortSpec> {
        vec![PortSpec::new(self.cfg.wide_bytes, self.cfg.id_bits)]
    }

    fn master_ports(&self) -> Vec<PortSpec> {
        vec![PortSpec::new(self.cfg.narrow_bytes, self.cfg.id_bits)]
    }

    fn eval(&mut self, io: &mut Io<'_>) {
        io.s_set_ar_ready(0, self.read.is_none());
        let ar = self.read.as_ref().and_then(|r| r.subs.get(r.ar_sent).copied());
        io.m_drive_ar(0, ar);
        io.m_set_r_ready(0, self.read.is_some() && self.r_out.len() < STAGE);
        io.s_drive_r(0, self.r_out.front().cloned());

        io.s_set_aw_ready(0, self.writes.len() < self.cfg.max_writes);
        io.m_drive_aw(0, self.aw_out.front().copied());
        io.s_set_w_ready(0, self.w_in.len() < STAGE);
        let w = self.narrow_w();
        io.m_drive_w(0, w);
        io.m_set_b_ready(0, self.b_out.len() < STAGE);
        io.s_drive_b(0, self.b_out.front().cloned());
    }

    fn commit(&mut self, io: &Io<'_>, ctx: &mut Ctx<'_>) {
        let (n, wb) = (self.cfg.narrow_bytes, self.cfg.wide_bytes);
        // Reads.
        if io.s_r_fire(0).is_some() {
            self.r_out.pop_front();
        }
        if io.m_ar_fire(0).is_some() {
            self.read.as_mut().unwrap().ar_sent += 1;
        }
        if let Some(r) = io.m_r_fire(0) {
            let rd = self.read.as_mut().unwrap();
            if r.id != rd.orig.id {
                ctx.report(Rule::Orphan, format!("narrow read data for ID {} while serving {}", r.id, rd.orig.id));
            }
            let a = rd.r.addr(&rd.subs);
            let nb = a & !(n as u64 - 1);
            let off = (nb % wb as u64) as usize;
            rd.buf[off..off + n].copy_from_slice(&r.data[..n]);
            rd.resp = rd.resp.merge(r.resp);
            let k = orig_beat(&rd.orig, a);
            let last = rd.r.is_last(&rd.subs);
            if last || orig_beat(&rd.orig, rd.r.next(&rd.subs).addr(&rd.subs)) != k {
                self.r_out.push_back(ResponseBeat {
                    id: rd.orig.id,
                    data: Bytes::from(std::mem::replace(&mut rd.buf, vec![0; wb])),
                    resp: std::mem::replace(&mut rd.resp, Resp::Okay),
                    last: k == rd.orig.len as usize,
                    tag: rd.orig.tag,
                });
            }
            if last {
                self.read = None;
            } else {
                rd.r = rd.r.next(&rd.subs);
            }
        }
        if let Some(c) = io.s_ar_fire(0) {
            self.read = Some(DownRead {
                orig: *c,
                subs: downsize_command(c, n, 256),
                ar_sent: 0,
                r: Cursor::default(),
                buf: vec![0; wb],
                resp: Resp::Okay,
            });
        }

        // Writes.
        if io.s_b_fire(0).is_some() {
            self.b_out.pop_front();
        }
        if let Some(b) = io.m_b_fire(0) {
            match self.writes.iter().position(|w| w.orig.id == b.id && w.b_left > 0) {
                Some(i) => {
                    let wr = &mut self.writes[i];
                    wr.resp = wr.resp.merge(b.resp);
                    wr.b_left -= 1;
                    if wr.b_left == 0 {
                        debug_assert_eq!(i, self.writes.iter().position(|w| w.orig.id == b.id).unwrap());
                        let wr = self.writes.remove(i).unwrap();
                        self.b_out.push_back(ResponseBeat::write(wr.orig.id, wr.resp, wr.orig.tag));
                    }
                }
                None => ctx.report(Rule::Orphan, format!("narrow write response for idle ID {}", b.id)),
            }
        }
        if io.m_aw_fire(0).is_some() {
            self.aw_out.pop_front();
            self.aw_sent += 1;
        }
        if io.m_w_fire(0).is_some() {
            let wr = self.writes.iter_mut().find(|w| w.w.sub < w.subs.len()).unwrap();
            let a = wr.w.addr(&wr.subs);
            let k = orig_beat(&wr.orig, a);
            let done = wr.w.is_last(&wr.subs) || orig_beat(&wr.orig, wr.w.next(&wr.subs).addr(&wr.subs)) != k;
            wr.w = if wr.w.is_last(&wr.subs) {
                Cursor {
                    sub: wr.subs.len(),
                    beat: 0,
                }
            } else {
                wr.w.next(&wr.subs)
            };
            if done {
                self.w_in.pop_front();
            }
        }
        if let Some(w) = io.s_w_fire(0) {
            self.w_in.push_back(w.clone());
        }
        if let Some(c) = io.s_aw_fire(0) {
            let subs = downsize_command(c, n, 256);
            let first_seq = self.aw_seq;
            self.aw_seq += subs.len() as u64;
            self.aw_out.extend(subs.iter().copied());
            self.writes.push_back(DownWrite {
                orig: *c,
                b_left: subs.len(),
                subs,
                first_seq,
                w: Cursor::default(),
                resp: Resp::Okay,
            });
        }
    }

    fn busy(&self) -> bool {
        self.read.is_some() || !self.r_out.is_empty() || !self.writes.is_empty() || !self.b_out.is_empty()
    }

    fn describe(&self) -> String {
        format!(
            "read {} r {} writes {} aw {} w {} b {}",
            self.read.is_some(),
            self.r_out.len(),
            self.writes.len(),
            self.aw_out.len(),
            self.w_in.len(),
            self.b_out.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Dir;

    fn cmd(addr: u64, len: u8, size: u64) -> Command {
        Command::new(Dir::Read, addr, len, size, TransactionId::new(0, 1).unwrap())
    }

    #[test]
    fn upsize_packs_aligned_burst() {
        let c = upsize_command(&cmd(0, 7, 8), 64);
        assert_eq!((c.addr, c.len, c.size), (0, 0, 64));
    }

    #[test]
    fn upsize_crossing_word() {
        let c = upsize_command(&cmd(0x38, 1, 8), 64);
        assert_eq!((c.addr, c.len, c.size), (0x38, 1, 64));
    }

    #[test]
    fn upsize_respects_attributes() {
        let mut c = cmd(0x38, 1, 8);
        c.attrs.modifiable = false;
        assert_eq!(upsize_command(&c, 64), c);
    }

    #[test]
    fn downsize_splits() {
        let subs = downsize_command(&cmd(0, 0, 64), 8, 256);
        assert_eq!(subs.len(), 1);
        assert_eq!((subs[0].len, subs[0].size), (7, 8));
        let subs = downsize_command(&cmd(0, 63, 64), 1, 256);
        assert_eq!(subs.len(), 16);
        assert!(subs.iter().all(|s| s.len == 255 && s.size == 1));
        assert_eq!(subs[1].addr, 256);
        let same = cmd(0x10, 3, 8);
        assert_eq!(downsize_command(&same, 8, 256), vec![same]);
    }

    #[test]
    fn read_slot_assignment() {
        let id = |v| TransactionId::new(v, 2).unwrap();
        assert_eq!(assign_read_upsizer(&[Some(id(0)), Some(id(1))], id(2)), None);
        assert_eq!(assign_read_upsizer(&[Some(id(0)), None], id(0)), Some(0));
        assert_eq!(assign_read_upsizer(&[None, Some(id(3))], id(3)), Some(1));
        assert_eq!(assign_read_upsizer(&[None, None], id(3)), Some(0));
    }

    /// Byte-walk oracle: the wide command covers exactly the wide words
    /// touched by the narrow one.
    #[test]
    fn upsize_covers_same_words() {
        for addr in (0..0x100).step_by(3) {
            for len in 0..20u8 {
                for size in [1u64, 2, 4, 8] {
                    let c = cmd(addr, len, size);
                    let w = upsize_command(&c, 64);
                    let words: std::collections::BTreeSet<u64> = (c.addr..c.end_addr()).map(|a| a / 64).collect();
                    let wide: Vec<u64> = (0..w.beats()).map(|k| w.beat_addr(k) / 64).collect();
                    assert_eq!(wide, words.into_iter().collect::<Vec<_>>());
                }
            }
        }
    }

    #[test]
    fn downsize_covers_same_bytes() {
        for addr in (0..0x200).step_by(5) {
            for len in [0u8, 1, 7, 63, 255] {
                let c = cmd(addr, len, 64);
                let subs = downsize_command(&c, 8, 256);
                let mut bytes = Vec::new();
                for s in &subs {
                    for k in 0..s.beats() {
                        let slot = beat_slot(s, k, 8);
                        let base = slot.addr & !7;
                        bytes.extend(slot.lanes.map(|l| base + l as u64));
                    }
                }
                assert_eq!(bytes, (c.addr..c.end_addr()).collect::<Vec<_>>());
            }
        }
    }
}
