//! Switching fabric: crossbar with per-connection pipeline registers, and
//! the multiplexer and demultiplexer as its one-sided special cases.

use bytes::Bytes;

use crate::idconv::{RemapConfig, Remapper};
use crate::kernel::{
    Chan, CombPath, CompId, Component, Ctx, Io, NetlistBuilder, PortRef, PortSpec, RrArbiter, Side, Signal, SpillReg,
};
use crate::protocol::{index_bits, Budget, Command, DataBeat, Dir, Resp, ResponseBeat, Rule, TransactionId};
use crate::ConfigError;

/// Slave-side ID widths above this are rejected, since the demultiplexer
/// keeps one counter per ID value.
pub const MAX_SLAVE_ID_BITS: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddrRule {
    pub start: u64,
    /// Exclusive.
    pub end: u64,
    pub port: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    DefaultPort(usize),
    ErrorSlave,
}

/// Decode result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Port(usize),
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddrMap {
    pub rules: Vec<AddrRule>,
    pub fallback: Fallback,
}

impl AddrMap {
    pub fn new(rules: Vec<AddrRule>, fallback: Fallback) -> Self {
        Self { rules, fallback }
    }

    /// Everything goes to one port.
    pub fn single(port: usize) -> Self {
        Self::new(Vec::new(), Fallback::DefaultPort(port))
    }

    /// `ports` consecutive regions of `size` bytes starting at `base`.
    pub fn contiguous(base: u64, size: u64, ports: usize, fallback: Fallback) -> Self {
        let rules = (0..ports)
            .map(|p| AddrRule {
                start: base + p as u64 * size,
                end: base + (p as u64 + 1) * size,
                port: p,
            })
            .collect();
        Self::new(rules, fallback)
    }

    pub fn decode(&self, addr: u64) -> Route {
        match self.rules.iter().find(|r| (r.start..r.end).contains(&addr)) {
            Some(r) => Route::Port(r.port),
            None => match self.fallback {
                Fallback::DefaultPort(p) => Route::Port(p),
                Fallback::ErrorSlave => Route::Error,
            },
        }
    }

    pub fn validate(&self, masters: usize) -> Result<(), ConfigError> {
        for (i, r) in self.rules.iter().enumerate() {
            if r.start >= r.end {
                return Err(ConfigError::invalid(format!("address rule {i} is empty")));
            }
            if r.port >= masters {
                return Err(ConfigError::invalid(format!("address rule {i} targets port {}", r.port)));
            }
            if let Some(o) = self.rules[..i].iter().find(|o| o.start < r.end && r.start < o.end) {
                return Err(ConfigError::invalid(format!(
                    "address rules [{:#x}, {:#x}) and [{:#x}, {:#x}) overlap",
                    o.start, o.end, r.start, r.end
                )));
            }
        }
        if let Fallback::DefaultPort(p) = self.fallback {
            if p >= masters {
                return Err(ConfigError::invalid(format!("default port {p} out of range")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct XbarConfig {
    pub slaves: usize,
    pub masters: usize,
    pub data_bytes: usize,
    /// ID width of the slave ports.
    pub id_bits: u8,
    /// Per slave port; one decoder per direction.
    pub write_maps: Vec<AddrMap>,
    pub read_maps: Vec<AddrMap>,
    /// Per internal connection `s * masters + m`, in the order aw, w, b, ar, r.
    pub pipeline: Vec<[bool; 5]>,
    /// Per internal connection; omitted connections decode to the error slave.
    pub connectivity: Vec<bool>,
    /// Outstanding transactions per ID and direction at each demultiplexer.
    pub max_per_id: usize,
    /// Write-grant FIFO depth of each multiplexer.
    pub max_writes: usize,
}

impl XbarConfig {
    pub fn new(slaves: usize, masters: usize, data_bytes: usize, id_bits: u8, map: AddrMap) -> Self {
        let n = slaves * masters;
        Self {
            slaves,
            masters,
            data_bytes,
            id_bits,
            write_maps: vec![map.clone(); slaves],
            read_maps: vec![map; slaves],
            pipeline: vec![[false; 5]; n],
            connectivity: vec![true; n],
            max_per_id: 8,
            max_writes: 8,
        }
    }

    /// Same flags on every internal connection.
    pub fn with_pipeline(mut self, flags: [bool; 5]) -> Self {
        self.pipeline.iter_mut().for_each(|p| *p = flags);
        self
    }

    pub fn with_fallback(mut self, slave: usize, fallback: Fallback) -> Self {
        self.write_maps[slave].fallback = fallback;
        self.read_maps[slave].fallback = fallback;
        self
    }

    pub fn disconnect(mut self, slave: usize, master: usize) -> Self {
        self.connectivity[slave * self.masters + master] = false;
        self
    }

    pub fn master_id_bits(&self) -> u8 {
        self.id_bits + index_bits(self.slaves)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.slaves == 0 || self.masters == 0 || self.slaves > 64 || self.masters > 63 {
            return Err(ConfigError::invalid("crossbar needs 1..=64 slave and 1..=63 master ports"));
        }
        if self.id_bits > MAX_SLAVE_ID_BITS {
            return Err(ConfigError::invalid(format!(
                "crossbar slave ID width {} exceeds {MAX_SLAVE_ID_BITS}",
                self.id_bits
            )));
        }
        if self.master_id_bits() > 32 {
            return Err(ConfigError::invalid("crossbar master ID width exceeds 32 bits"));
        }
        let n = self.slaves * self.masters;
        if self.write_maps.len() != self.slaves
            || self.read_maps.len() != self.slaves
            || self.pipeline.len() != n
            || self.connectivity.len() != n
        {
            return Err(ConfigError::invalid("crossbar per-port tables have the wrong length"));
        }
        if self.max_per_id == 0 || self.max_writes == 0 || self.max_per_id > u16::MAX as usize {
            return Err(ConfigError::invalid("crossbar limits must be in 1..=65535"));
        }
        for m in self.write_maps.iter().chain(&self.read_maps) {
            m.validate(self.masters)?;
        }
        Ok(())
    }
}

/// Master-side ID of a command entering through slave port `slave`, whose
/// IDs are `low_bits` wide. An upstream with narrower IDs still gets its
/// prefix at `low_bits`.
pub fn mux_forward(slave: usize, id: TransactionId, low_bits: u8, sel_bits: u8) -> TransactionId {
    id.prepend(slave as u32, sel_bits, low_bits)
}

/// Slave port and restored ID of a response carrying a master-side ID.
pub fn mux_route_response(id: TransactionId, low_bits: u8) -> (usize, TransactionId) {
    let (s, low) = id.split(low_bits);
    (s as usize, low)
}

/// Per-ID bookkeeping of a demultiplexer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counter {
    pub count: u16,
    /// Target of all outstanding transactions while `count > 0`; the error
    /// slave is index `masters`.
    pub index: u16,
}

/// Whether a command may go to `target` without risking reordering among
/// its ID.
pub fn demux_admit(c: Counter, target: usize, max: usize) -> bool {
    (c.count == 0 || c.index as usize == target) && (c.count as usize) < max
}

#[derive(Debug, Clone)]
pub struct DemuxState {
    counters: [Vec<Counter>; 2],
    outstanding: [usize; 2],
    /// Write commands forwarded whose last data beat has not passed.
    w_pending: usize,
    w_target: usize,
    rsp_arb: [RrArbiter; 2],
    err: ErrorSlave,
}

impl DemuxState {
    fn new(masters: usize, id_bits: u8, zero: Bytes) -> Self {
        let n = 1usize << id_bits;
        Self {
            counters: [vec![Counter::default(); n], vec![Counter::default(); n]],
            outstanding: [0, 0],
            w_pending: 0,
            w_target: 0,
            rsp_arb: [RrArbiter::new(masters + 1), RrArbiter::new(masters + 1)],
            err: ErrorSlave::new(zero),
        }
    }

    pub fn counter(&self, dir: Dir, id: u32) -> Counter {
        self.counters[dir.index()][id as usize]
    }

    pub fn outstanding(&self, dir: Dir) -> usize {
        self.outstanding[dir.index()]
    }

    pub fn write_lock(&self) -> Option<usize> {
        (self.w_pending > 0).then_some(self.w_target)
    }
}

#[derive(Debug, Clone)]
pub struct MuxState {
    arb: [RrArbiter; 2],
    /// Slave ports of write commands whose data has not fully passed.
    grants: std::collections::VecDeque<usize>,
    depth: usize,
}

impl MuxState {
    pub fn write_grants(&self) -> impl Iterator<Item = usize> + '_ {
        self.grants.iter().copied()
    }

    fn grants_full(&self) -> bool {
        self.grants.len() >= self.depth
    }
}

/// Answers every transaction with a decode error, one beat per cycle.
#[derive(Debug, Clone)]
struct ErrorSlave {
    cmds: [std::collections::VecDeque<Command>; 2],
    /// Write commands whose data has been absorbed.
    b: std::collections::VecDeque<Command>,
    absorbed: usize,
    r_beat: usize,
    zero: Bytes,
}

const ERR_DEPTH: usize = 2;

impl ErrorSlave {
    fn new(zero: Bytes) -> Self {
        Self {
            cmds: Default::default(),
            b: Default::default(),
            absorbed: 0,
            r_beat: 0,
            zero,
        }
    }

    fn ready(&self, d: Dir) -> bool {
        self.cmds[d.index()].len() < ERR_DEPTH
    }

    fn response(&self, d: Dir) -> Option<ResponseBeat> {
        match d {
            Dir::Read => self.cmds[0].front().map(|c| ResponseBeat {
                id: c.id,
                data: self.zero.clone(),
                resp: Resp::DecodeError,
                last: self.r_beat == c.len as usize,
                tag: c.tag,
            }),
            Dir::Write => self.b.front().map(|c| ResponseBeat::write(c.id, Resp::DecodeError, c.tag)),
        }
    }

    fn absorb(&mut self, last: bool) {
        if last {
            let c = self.cmds[1][self.absorbed];
            self.absorbed += 1;
            self.b.push_back(c);
        }
    }

    fn responded(&mut self, d: Dir) {
        match d {
            Dir::Read => {
                if self.r_beat == self.cmds[0][0].len as usize {
                    self.cmds[0].pop_front();
                    self.r_beat = 0;
                } else {
                    self.r_beat += 1;
                }
            }
            Dir::Write => {
                self.b.pop_front();
                self.cmds[1].pop_front();
                self.absorbed -= 1;
            }
        }
    }

    fn is_empty(&self) -> bool {
        self.cmds[0].is_empty() && self.cmds[1].is_empty()
    }
}

#[derive(Debug, Clone, Default)]
struct Conn {
    on: bool,
    cmd: [Option<SpillReg<Command>>; 2],
    w: Option<SpillReg<DataBeat>>,
    rsp: [Option<SpillReg<ResponseBeat>>; 2],
}

impl Conn {
    fn new(on: bool, flags: [bool; 5]) -> Self {
        let reg = |i: usize| (on && flags[i]).then(SpillReg::new);
        Self {
            on,
            cmd: [
                (on && flags[Chan::Ar.index()]).then(SpillReg::new),
                (on && flags[Chan::Aw.index()]).then(SpillReg::new),
            ],
            w: reg(Chan::W.index()),
            rsp: [
                (on && flags[Chan::R.index()]).then(SpillReg::new),
                (on && flags[Chan::B.index()]).then(SpillReg::new),
            ],
        }
    }

    fn is_empty(&self) -> bool {
        self.cmd.iter().flatten().all(|r| r.is_empty())
            && self.w.as_ref().is_none_or(|r| r.is_empty())
            && self.rsp.iter().flatten().all(|r| r.is_empty())
    }
}

/// Decisions of the last `eval`, consumed by `commit`.
#[derive(Debug, Clone, Default)]
struct Plan {
    /// Admitted command per direction and slave port, with its target.
    offer: [Vec<Option<(usize, Command)>>; 2],
    cmd_grant: [Vec<Option<usize>>; 2],
    /// Response source per direction and master port: slave port, or `None`
    /// for an unroutable response.
    rsp_src: [Vec<Option<usize>>; 2],
    rsp_grant: [Vec<Option<usize>>; 2],
    /// Scratch for commit: which connection registers emptied.
    reg_out: Vec<bool>,
    w_fired: Vec<Option<usize>>,
}

/// Fully or partially connected crossbar.
///
/// Each slave port has a demultiplexer that decodes the address, keeps
/// same-ID transactions on one master port, and issues writes in lockstep
/// with their data. Each master port has a multiplexer that arbitrates
/// round-robin, extends IDs with the slave port index, and orders write data
/// by a grant FIFO. Responses travel back by the ID prefix.
pub struct Xbar {
    cfg: XbarConfig,
    sel_bits: u8,
    conns: Vec<Conn>,
    demux: Vec<DemuxState>,
    mux: Vec<MuxState>,
    plan: Plan,
}

impl Xbar {
    pub fn new(cfg: XbarConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let (s, m) = (cfg.slaves, cfg.masters);
        let zero = Bytes::from(vec![0u8; cfg.data_bytes]);
        Ok(Self {
            sel_bits: index_bits(s),
            conns: (0..s * m).map(|i| Conn::new(cfg.connectivity[i], cfg.pipeline[i])).collect(),
            demux: (0..s).map(|_| DemuxState::new(m, cfg.id_bits, zero.clone())).collect(),
            mux: (0..m)
                .map(|_| MuxState {
                    arb: [RrArbiter::new(s), RrArbiter::new(s)],
                    grants: Default::default(),
                    depth: cfg.max_writes,
                })
                .collect(),
            plan: Plan {
                offer: [vec![None; s], vec![None; s]],
                cmd_grant: [vec![None; m], vec![None; m]],
                rsp_src: [vec![None; m], vec![None; m]],
                rsp_grant: [vec![None; s], vec![None; s]],
                reg_out: vec![false; s * (m + 1)],
                w_fired: vec![None; m],
            },
            cfg,
        })
    }

    /// Multiplexer: `slaves` ports onto one.
    pub fn mux(slaves: usize, data_bytes: usize, id_bits: u8) -> Result<Self, ConfigError> {
        Self::new(XbarConfig::new(slaves, 1, data_bytes, id_bits, AddrMap::single(0)))
    }

    /// Demultiplexer: one port onto `masters` by address.
    pub fn demux(masters: usize, data_bytes: usize, id_bits: u8, map: AddrMap) -> Result<Self, ConfigError> {
        Self::new(XbarConfig::new(1, masters, data_bytes, id_bits, map))
    }

    pub fn config(&self) -> &XbarConfig {
        &self.cfg
    }

    pub fn demux_state(&self, slave: usize) -> &DemuxState {
        &self.demux[slave]
    }

    pub fn mux_state(&self, master: usize) -> &MuxState {
        &self.mux[master]
    }

    fn conn(&self, s: usize, m: usize) -> &Conn {
        &self.conns[s * self.cfg.masters + m]
    }

    fn route(&self, s: usize, d: Dir, c: &Command) -> usize {
        let map = match d {
            Dir::Read => &self.cfg.read_maps[s],
            Dir::Write => &self.cfg.write_maps[s],
        };
        match map.decode(c.addr) {
            Route::Port(m) if self.conn(s, m).on => m,
            _ => self.cfg.masters,
        }
    }

    fn admit(&self, s: usize, d: Dir, c: &Command, target: usize) -> bool {
        let st = &self.demux[s];
        let ctr = st.counters[d.index()][c.id.value() as usize];
        if !demux_admit(ctr, target, self.cfg.max_per_id) {
            return false;
        }
        d == Dir::Read || st.w_pending == 0 || (st.w_target == target && st.w_pending < self.cfg.max_writes)
    }

    /// Command offered on connection `(s, m)` toward the multiplexer.
    fn cmd_at_mux(&self, d: Dir, s: usize, m: usize) -> Option<Command> {
        let c = self.conn(s, m);
        if !c.on {
            return None;
        }
        match &c.cmd[d.index()] {
            Some(reg) => reg.out().copied(),
            None => match self.plan.offer[d.index()][s] {
                Some((t, cmd)) if t == m => Some(cmd),
                _ => None,
            },
        }
    }

    fn eval_cmd(&mut self, io: &mut Io<'_>, d: Dir) {
        let (ns, nm) = (self.cfg.slaves, self.cfg.masters);
        let di = d.index();
        for s in 0..ns {
            let offer = io.s_cmd(d, s).copied().and_then(|c| {
                let t = self.route(s, d, &c);
                self.admit(s, d, &c, t).then_some((t, c))
            });
            self.plan.offer[di][s] = offer;
        }
        for m in 0..nm {
            let mut mask = 0u64;
            if !(d == Dir::Write && self.mux[m].grants_full()) {
                for s in 0..ns {
                    if self.cmd_at_mux(d, s, m).is_some() {
                        mask |= 1 << s;
                    }
                }
            }
            let g = self.mux[m].arb[di].grant(mask);
            self.plan.cmd_grant[di][m] = g;
            let out = g.and_then(|s| self.cmd_at_mux(d, s, m)).map(|mut c| {
                c.id = mux_forward(g.unwrap(), c.id, self.cfg.id_bits, self.sel_bits);
                c
            });
            io.m_drive_cmd(d, m, out);
        }
        for s in 0..ns {
            let ready = match self.plan.offer[di][s] {
                None => false,
                Some((t, _)) if t == nm => self.demux[s].err.ready(d),
                Some((t, _)) => match &self.conn(s, t).cmd[di] {
                    Some(reg) => reg.ready(),
                    None => self.plan.cmd_grant[di][t] == Some(s) && io.m_cmd_ready(d, t),
                },
            };
            io.s_set_cmd_ready(d, s, ready);
        }
    }

    fn w_at_mux(&self, io: &Io<'_>, s: usize, m: usize) -> Option<DataBeat> {
        match &self.conn(s, m).w {
            Some(reg) => reg.out().cloned(),
            None => {
                let st = &self.demux[s];
                if st.w_pending > 0 && st.w_target == m {
                    io.s_w(s).cloned()
                } else {
                    None
                }
            }
        }
    }

    fn eval_w(&mut self, io: &mut Io<'_>) {
        let nm = self.cfg.masters;
        for m in 0..nm {
            let out = self.mux[m].grants.front().and_then(|&s| self.w_at_mux(io, s, m));
            io.m_drive_w(m, out);
        }
        for s in 0..self.cfg.slaves {
            let st = &self.demux[s];
            let ready = if st.w_pending == 0 {
                false
            } else if st.w_target == nm {
                true
            } else {
                let t = st.w_target;
                match &self.conn(s, t).w {
                    Some(reg) => reg.ready(),
                    None => self.mux[t].grants.front() == Some(&s) && io.m_w_ready(t),
                }
            };
            io.s_set_w_ready(s, ready);
        }
    }

    fn rsp_valid(&self, io: &Io<'_>, d: Dir, s: usize, m: usize) -> bool {
        if m == self.cfg.masters {
            let e = &self.demux[s].err;
            return match d {
                Dir::Read => !e.cmds[0].is_empty(),
                Dir::Write => !e.b.is_empty(),
            };
        }
        let c = self.conn(s, m);
        match &c.rsp[d.index()] {
            Some(reg) => reg.out().is_some(),
            None => c.on && self.plan.rsp_src[d.index()][m] == Some(s) && io.m_rsp(d, m).is_some(),
        }
    }

    fn rsp_at_demux(&self, io: &Io<'_>, d: Dir, s: usize, m: usize) -> Option<ResponseBeat> {
        if m == self.cfg.masters {
            return self.demux[s].err.response(d);
        }
        match &self.conn(s, m).rsp[d.index()] {
            Some(reg) => reg.out().cloned(),
            None => io.m_rsp(d, m).map(|r| ResponseBeat {
                id: r.id.split(self.cfg.id_bits).1,
                ..r.clone()
            }),
        }
    }

    fn eval_rsp(&mut self, io: &mut Io<'_>, d: Dir) {
        let (ns, nm) = (self.cfg.slaves, self.cfg.masters);
        let di = d.index();
        for m in 0..nm {
            self.plan.rsp_src[di][m] = io.m_rsp(d, m).and_then(|r| {
                let (s, _) = mux_route_response(r.id, self.cfg.id_bits);
                (s < ns && self.conn(s, m).on).then_some(s)
            });
        }
        for s in 0..ns {
            let mut mask = 0u64;
            for m in 0..=nm {
                if self.rsp_valid(io, d, s, m) {
                    mask |= 1 << m;
                }
            }
            let g = self.demux[s].rsp_arb[di].grant(mask);
            self.plan.rsp_grant[di][s] = g;
            io.s_drive_rsp(d, s, g.and_then(|m| self.rsp_at_demux(io, d, s, m)));
        }
        for m in 0..nm {
            let ready = match self.plan.rsp_src[di][m] {
                None => io.m_rsp(d, m).is_some(),
                Some(s) => match &self.conn(s, m).rsp[di] {
                    Some(reg) => reg.ready(),
                    None => self.plan.rsp_grant[di][s] == Some(m) && io.s_rsp_ready(d, s),
                },
            };
            io.m_set_rsp_ready(d, m, ready);
        }
    }

    fn commit_cmd(&mut self, io: &Io<'_>, d: Dir) {
        let (ns, nm) = (self.cfg.slaves, self.cfg.masters);
        let di = d.index();
        let mut reg_out = std::mem::take(&mut self.plan.reg_out);
        reg_out.fill(false);
        for m in 0..nm {
            let g = self.plan.cmd_grant[di][m];
            let fired = io.m_cmd_fire(d, m).is_some();
            self.mux[m].arb[di].update(g, fired);
            if let (true, Some(s)) = (fired, g) {
                reg_out[s * nm + m] = true;
                if d == Dir::Write {
                    self.mux[m].grants.push_back(s);
                }
            }
        }
        for s in 0..ns {
            let fired = io.s_cmd_fire(d, s).is_some();
            let mut input = None;
            if fired {
                let (t, c) = self.plan.offer[di][s].expect("handshake without offer");
                let st = &mut self.demux[s];
                let ctr = &mut st.counters[di][c.id.value() as usize];
                ctr.count += 1;
                ctr.index = t as u16;
                st.outstanding[di] += 1;
                if d == Dir::Write {
                    st.w_pending += 1;
                    st.w_target = t;
                }
                if t == nm {
                    st.err.cmds[di].push_back(c);
                } else {
                    input = Some((t, c));
                }
            }
            for m in 0..nm {
                let i = s * nm + m;
                if let Some(reg) = &mut self.conns[i].cmd[di] {
                    let inp = input.filter(|(t, _)| *t == m).map(|(_, c)| c);
                    reg.commit(inp, reg_out[i]);
                }
            }
        }
        self.plan.reg_out = reg_out;
    }

    fn commit_w(&mut self, io: &Io<'_>) {
        let nm = self.cfg.masters;
        let mut out_fired = std::mem::take(&mut self.plan.w_fired);
        out_fired.fill(None);
        for (m, f) in out_fired.iter_mut().enumerate() {
            if let Some(w) = io.m_w_fire(m) {
                let s = *self.mux[m].grants.front().expect("write data without grant");
                if w.last {
                    self.mux[m].grants.pop_front();
                }
                *f = Some(s);
            }
        }
        for s in 0..self.cfg.slaves {
            let st = &mut self.demux[s];
            let t = st.w_target;
            let input = io.s_w_fire(s).cloned();
            if let Some(w) = &input {
                if w.last {
                    st.w_pending -= 1;
                }
                if t == nm {
                    st.err.absorb(w.last);
                }
            }
            for (m, fired) in out_fired.iter().enumerate() {
                if let Some(reg) = &mut self.conns[s * nm + m].w {
                    let inp = if m == t { input.clone() } else { None };
                    reg.commit(inp, *fired == Some(s));
                }
            }
        }
        self.plan.w_fired = out_fired;
    }

    fn commit_rsp(&mut self, io: &Io<'_>, d: Dir, ctx: &mut Ctx<'_>) {
        let (ns, nm) = (self.cfg.slaves, self.cfg.masters);
        let di = d.index();
        let mut reg_out = std::mem::take(&mut self.plan.reg_out);
        reg_out.fill(false);
        for s in 0..ns {
            let g = self.plan.rsp_grant[di][s];
            let fired = io.s_rsp_fire(d, s);
            self.demux[s].rsp_arb[di].update(g, fired.is_some_and(|r| r.last));
            let (Some(r), Some(m)) = (fired, g) else { continue };
            reg_out[s * (nm + 1) + m] = true;
            let st = &mut self.demux[s];
            if m == nm {
                st.err.responded(d);
            }
            if r.last {
                let ctr = &mut st.counters[di][r.id.value() as usize];
                if ctr.count == 0 {
                    ctx.report(Rule::Orphan, format!("{d} response on slave port {s} for idle ID {}", r.id));
                } else {
                    ctr.count -= 1;
                    st.outstanding[di] -= 1;
                }
            }
        }
        for m in 0..nm {
            let fired = io.m_rsp_fire(d, m);
            let src = self.plan.rsp_src[di][m];
            if let (Some(r), None) = (fired, src) {
                ctx.report(Rule::Orphan, format!("unroutable {d} response ID {} on master port {m}", r.id));
            }
            for s in 0..ns {
                if let Some(reg) = &mut self.conns[s * nm + m].rsp[di] {
                    let inp = fired.filter(|_| src == Some(s)).map(|r| ResponseBeat {
                        id: r.id.split(self.cfg.id_bits).1,
                        ..r.clone()
                    });
                    reg.commit(inp, reg_out[s * (nm + 1) + m]);
                }
            }
        }
        self.plan.reg_out = reg_out;
    }
}

impl Component for Xbar {
    fn kind(&self) -> &'static str {
        "xbar"
    }

    fn slave_ports(&self) -> Vec<PortSpec> {
        vec![PortSpec::new(self.cfg.data_bytes, self.cfg.id_bits); self.cfg.slaves]
    }

    fn master_ports(&self) -> Vec<PortSpec> {
        vec![PortSpec::new(self.cfg.data_bytes, self.cfg.master_id_bits()); self.cfg.masters]
    }

    fn comb_paths(&self) -> Vec<CombPath> {
        let mut v = Vec::new();
        for s in 0..self.cfg.slaves {
            for m in 0..self.cfg.masters {
                let i = s * self.cfg.masters + m;
                if !self.cfg.connectivity[i] {
                    continue;
                }
                for c in Chan::ALL {
                    if self.cfg.pipeline[i][c.index()] {
                        continue;
                    }
                    if c.is_request() {
                        v.extend(CombPath::through(c, (Side::Slave, s), (Side::Master, m)));
                    } else {
                        v.extend(CombPath::through(c, (Side::Master, m), (Side::Slave, s)));
                    }
                }
            }
        }
        // Admission and response routing look at the payload.
        for s in 0..self.cfg.slaves {
            for c in [Chan::Aw, Chan::Ar] {
                v.push(CombPath::new(Signal::valid(Side::Slave, s, c), Signal::ready(Side::Slave, s, c)));
            }
        }
        for m in 0..self.cfg.masters {
            for c in [Chan::B, Chan::R] {
                v.push(CombPath::new(Signal::valid(Side::Master, m, c), Signal::ready(Side::Master, m, c)));
            }
        }
        v
    }

    fn eval(&mut self, io: &mut Io<'_>) {
        self.eval_cmd(io, Dir::Read);
        self.eval_cmd(io, Dir::Write);
        self.eval_w(io);
        self.eval_rsp(io, Dir::Read);
        self.eval_rsp(io, Dir::Write);
    }

    fn commit(&mut self, io: &Io<'_>, ctx: &mut Ctx<'_>) {
        // Responses first, so that counters freed this cycle are visible in
        // the next one only.
        self.commit_rsp(io, Dir::Read, ctx);
        self.commit_rsp(io, Dir::Write, ctx);
        self.commit_w(io);
        self.commit_cmd(io, Dir::Read);
        self.commit_cmd(io, Dir::Write);
    }

    fn busy(&self) -> bool {
        self.demux.iter().any(|d| d.outstanding != [0, 0] || d.w_pending > 0 || !d.err.is_empty())
            || self.mux.iter().any(|m| !m.grants.is_empty())
            || self.conns.iter().any(|c| !c.is_empty())
    }

    fn describe(&self) -> String {
        let mut s = String::new();
        for (i, d) in self.demux.iter().enumerate() {
            if d.outstanding != [0, 0] || d.w_pending > 0 {
                s += &format!(
                    "s{i}: r {} w {} wlock {:?}; ",
                    d.outstanding[0],
                    d.outstanding[1],
                    d.write_lock()
                );
            }
        }
        for (i, m) in self.mux.iter().enumerate() {
            if !m.grants.is_empty() {
                s += &format!("m{i}: grants {:?}; ", m.grants);
            }
        }
        let busy = self.conns.iter().filter(|c| !c.is_empty()).count();
        s + &format!("{busy} connections hold beats")
    }
}

/// Ports of a crosspoint added to a netlist.
#[derive(Debug, Clone)]
pub struct Crosspoint {
    pub xbar: CompId,
    pub remappers: Vec<CompId>,
    pub slaves: Vec<PortRef>,
    pub masters: Vec<PortRef>,
}

/// Adds a crossbar with an ID remapper behind every master port, so that
/// master and slave ports carry the same ID width. `budgets` has one entry
/// per master port, or a single entry for all.
pub fn build_crosspoint(
    b: &mut NetlistBuilder,
    name: &str,
    cfg: XbarConfig,
    budgets: &[Budget],
) -> Result<Crosspoint, ConfigError> {
    if budgets.len() != 1 && budgets.len() != cfg.masters {
        return Err(ConfigError::invalid(format!(
            "crosspoint {name}: {} remap budgets for {} master ports",
            budgets.len(),
            cfg.masters
        )));
    }
    let (ns, nm, ib, ob, d) = (cfg.slaves, cfg.masters, cfg.master_id_bits(), cfg.id_bits, cfg.data_bytes);
    let mut remap_cfgs = Vec::with_capacity(nm);
    for m in 0..nm {
        let bud = budgets[if budgets.len() == 1 { 0 } else { m }];
        remap_cfgs.push(RemapConfig::from_budget(d, ib, ob, bud)?);
    }
    let x = b.add(name, Xbar::new(cfg)?);
    let mut remappers = Vec::with_capacity(nm);
    let mut masters = Vec::with_capacity(nm);
    for (m, rc) in remap_cfgs.into_iter().enumerate() {
        let r = b.add(format!("{name}.remap{m}"), Remapper::new(rc)?);
        b.connect(x.m(m), r.s(0))?;
        remappers.push(r);
        masters.push(r.m(0));
    }
    Ok(Crosspoint {
        xbar: x,
        remappers,
        slaves: (0..ns).map(|s| x.s(s)).collect(),
        masters,
    })
}
