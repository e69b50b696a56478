//! Two-phase cycle engine and elementary stream blocks.
//!
//! Each cycle first settles all combinational signals: components are
//! evaluated from a worklist, and a component is evaluated again whenever
//! one of its inputs changes, until nothing changes. Then every component
//! commits its registered state exactly once.

mod cut;
mod netlist;
mod stream;

use std::any::Any;
use std::collections::VecDeque;

use crate::protocol::{Command, DataBeat, Dir, ResponseBeat, Rule, Violation};

pub use cut::Cut;
pub use netlist::{CompId, LinkId, Netlist, NetlistBuilder, PortRef, Timeout};
pub use stream::{RrArbiter, SpillReg, StreamFifo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Chan {
    Aw,
    W,
    B,
    Ar,
    R,
}

impl Chan {
    pub const ALL: [Chan; 5] = [Chan::Aw, Chan::W, Chan::B, Chan::Ar, Chan::R];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether the master side drives valid on this channel.
    pub fn is_request(self) -> bool {
        matches!(self, Chan::Aw | Chan::W | Chan::Ar)
    }
}

/// Valid, payload, and ready of one channel. Valid is `payload.is_some()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel<T> {
    pub payload: Option<T>,
    pub ready: bool,
}

impl<T> Default for Channel<T> {
    fn default() -> Self {
        Self {
            payload: None,
            ready: false,
        }
    }
}

impl<T> Channel<T> {
    pub fn valid(&self) -> bool {
        self.payload.is_some()
    }

    /// The payload if a handshake happens this cycle.
    pub fn fire(&self) -> Option<&T> {
        if self.ready {
            self.payload.as_ref()
        } else {
            None
        }
    }
}

/// Signals of one five-channel link.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkSignals {
    pub aw: Channel<Command>,
    pub w: Channel<DataBeat>,
    pub b: Channel<ResponseBeat>,
    pub ar: Channel<Command>,
    pub r: Channel<ResponseBeat>,
}

impl LinkSignals {
    pub fn valid(&self, c: Chan) -> bool {
        match c {
            Chan::Aw => self.aw.valid(),
            Chan::W => self.w.valid(),
            Chan::B => self.b.valid(),
            Chan::Ar => self.ar.valid(),
            Chan::R => self.r.valid(),
        }
    }

    pub fn ready(&self, c: Chan) -> bool {
        match c {
            Chan::Aw => self.aw.ready,
            Chan::W => self.w.ready,
            Chan::B => self.b.ready,
            Chan::Ar => self.ar.ready,
            Chan::R => self.r.ready,
        }
    }

    pub fn any_valid(&self) -> bool {
        Chan::ALL.iter().any(|&c| self.valid(c))
    }
}

/// Static properties of one port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortSpec {
    pub data_bytes: usize,
    pub id_bits: u8,
}

impl PortSpec {
    pub fn new(data_bytes: usize, id_bits: u8) -> Self {
        Self { data_bytes, id_bits }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Slave,
    Master,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sig {
    Valid,
    Ready,
}

/// One signal of one port of a component. `Valid` includes the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signal {
    pub side: Side,
    pub port: usize,
    pub chan: Chan,
    pub sig: Sig,
}

impl Signal {
    pub fn valid(side: Side, port: usize, chan: Chan) -> Self {
        Self {
            side,
            port,
            chan,
            sig: Sig::Valid,
        }
    }

    pub fn ready(side: Side, port: usize, chan: Chan) -> Self {
        Self {
            side,
            port,
            chan,
            sig: Sig::Ready,
        }
    }
}

/// A combinational dependency inside a component: `to` may change in the
/// same cycle when `from` changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CombPath {
    pub from: Signal,
    pub to: Signal,
}

impl CombPath {
    pub fn new(from: Signal, to: Signal) -> Self {
        Self { from, to }
    }

    /// Paths of a combinational pass-through of `chan` from `(from_side,
    /// from_port)` to `(to_side, to_port)`: valid forward, ready backward,
    /// plus ready depending on the incoming valid.
    pub fn through(chan: Chan, from: (Side, usize), to: (Side, usize)) -> [CombPath; 3] {
        [
            CombPath::new(Signal::valid(from.0, from.1, chan), Signal::valid(to.0, to.1, chan)),
            CombPath::new(Signal::ready(to.0, to.1, chan), Signal::ready(from.0, from.1, chan)),
            CombPath::new(Signal::valid(from.0, from.1, chan), Signal::ready(from.0, from.1, chan)),
        ]
    }
}

/// Gives `as_any` to every component type.
pub trait AsAny {
    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

impl<T: Any> AsAny for T {
    fn as_any(&self) -> &dyn Any {
        self
    }
    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

/// A cycle-level hardware block.
///
/// `eval` drives every output of the component from its registered state and
/// current inputs, and may be called any number of times per cycle; it must
/// not change registered state (scratch used to pass decisions to `commit`
/// is fine, since the last `eval` of a cycle always sees the settled
/// inputs). Every output that depends on an input in the same cycle must be
/// declared in `comb_paths`; components without any declared path are
/// evaluated once per cycle.
pub trait Component: AsAny {
    fn kind(&self) -> &'static str;
    fn slave_ports(&self) -> Vec<PortSpec>;
    fn master_ports(&self) -> Vec<PortSpec>;
    fn comb_paths(&self) -> Vec<CombPath> {
        Vec::new()
    }
    fn eval(&mut self, io: &mut Io<'_>);
    fn commit(&mut self, io: &Io<'_>, ctx: &mut Ctx<'_>);
    /// Whether any transaction is still held inside the component.
    fn busy(&self) -> bool;
    /// Stops injecting new transactions (traffic sources only).
    fn stop(&mut self) {}
    /// One-line description of the internal state for deadlock dumps.
    fn describe(&self) -> String {
        String::new()
    }
}

/// Scheduling state shared by all `Io` views during settle.
#[derive(Debug, Default)]
pub(crate) struct Wake {
    pub queue: VecDeque<u32>,
    pub queued: Vec<bool>,
    pub reactive: Vec<bool>,
    pub link_master: Vec<u32>,
    pub link_slave: Vec<u32>,
}

impl Wake {
    #[inline]
    fn push(&mut self, c: u32) {
        let c_us = c as usize;
        if self.reactive[c_us] && !self.queued[c_us] {
            self.queued[c_us] = true;
            self.queue.push_back(c);
        }
    }
}

/// A component's view of its ports during one cycle.
pub struct Io<'a> {
    links: &'a mut [LinkSignals],
    slaves: &'a [u32],
    masters: &'a [u32],
    wake: &'a mut Wake,
    cycle: u64,
}

#[inline]
fn update<T: PartialEq>(slot: &mut Option<T>, v: Option<T>) -> bool {
    if *slot != v {
        *slot = v;
        true
    } else {
        false
    }
}

#[inline]
fn update_flag(slot: &mut bool, v: bool) -> bool {
    if *slot != v {
        *slot = v;
        true
    } else {
        false
    }
}

macro_rules! slave_input {
    ($name:ident, $fire:ident, $ch:ident, $t:ty) => {
        #[inline]
        pub fn $name(&self, p: usize) -> Option<&$t> {
            self.links[self.slaves[p] as usize].$ch.payload.as_ref()
        }
        #[inline]
        pub fn $fire(&self, p: usize) -> Option<&$t> {
            self.links[self.slaves[p] as usize].$ch.fire()
        }
    };
}

macro_rules! master_input {
    ($name:ident, $fire:ident, $ch:ident, $t:ty) => {
        #[inline]
        pub fn $name(&self, p: usize) -> Option<&$t> {
            self.links[self.masters[p] as usize].$ch.payload.as_ref()
        }
        #[inline]
        pub fn $fire(&self, p: usize) -> Option<&$t> {
            self.links[self.masters[p] as usize].$ch.fire()
        }
    };
}

macro_rules! slave_ready_out {
    ($set:ident, $get:ident, $ch:ident) => {
        #[inline]
        pub fn $set(&mut self, p: usize, ready: bool) {
            let l = self.slaves[p] as usize;
            if update_flag(&mut self.links[l].$ch.ready, ready) {
                let c = self.wake.link_master[l];
                self.wake.push(c);
            }
        }
        #[inline]
        pub fn $get(&self, p: usize) -> bool {
            self.links[self.slaves[p] as usize].$ch.ready
        }
    };
}

macro_rules! master_ready_out {
    ($set:ident, $get:ident, $ch:ident) => {
        #[inline]
        pub fn $set(&mut self, p: usize, ready: bool) {
            let l = self.masters[p] as usize;
            if update_flag(&mut self.links[l].$ch.ready, ready) {
                let c = self.wake.link_slave[l];
                self.wake.push(c);
            }
        }
        #[inline]
        pub fn $get(&self, p: usize) -> bool {
            self.links[self.masters[p] as usize].$ch.ready
        }
    };
}

impl<'a> Io<'a> {
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    slave_input!(s_aw, s_aw_fire, aw, Command);
    slave_input!(s_w, s_w_fire, w, DataBeat);
    slave_input!(s_ar, s_ar_fire, ar, Command);
    master_input!(m_b, m_b_fire, b, ResponseBeat);
    master_input!(m_r, m_r_fire, r, ResponseBeat);

    slave_ready_out!(s_set_aw_ready, s_aw_ready, aw);
    slave_ready_out!(s_set_w_ready, s_w_ready, w);
    slave_ready_out!(s_set_ar_ready, s_ar_ready, ar);
    master_ready_out!(m_set_b_ready, m_b_ready, b);
    master_ready_out!(m_set_r_ready, m_r_ready, r);

    /// Ready of the slave port's response channels, driven by the peer.
    #[inline]
    pub fn s_b_ready(&self, p: usize) -> bool {
        self.links[self.slaves[p] as usize].b.ready
    }
    #[inline]
    pub fn s_r_ready(&self, p: usize) -> bool {
        self.links[self.slaves[p] as usize].r.ready
    }
    #[inline]
    pub fn m_aw_ready(&self, p: usize) -> bool {
        self.links[self.masters[p] as usize].aw.ready
    }
    #[inline]
    pub fn m_w_ready(&self, p: usize) -> bool {
        self.links[self.masters[p] as usize].w.ready
    }
    #[inline]
    pub fn m_ar_ready(&self, p: usize) -> bool {
        self.links[self.masters[p] as usize].ar.ready
    }

    /// Outputs as seen by the peer; used in `commit` to detect handshakes.
    #[inline]
    pub fn s_b_fire(&self, p: usize) -> Option<&ResponseBeat> {
        self.links[self.slaves[p] as usize].b.fire()
    }
    #[inline]
    pub fn s_r_fire(&self, p: usize) -> Option<&ResponseBeat> {
        self.links[self.slaves[p] as usize].r.fire()
    }
    #[inline]
    pub fn s_b(&self, p: usize) -> Option<&ResponseBeat> {
        self.links[self.slaves[p] as usize].b.payload.as_ref()
    }
    #[inline]
    pub fn s_r(&self, p: usize) -> Option<&ResponseBeat> {
        self.links[self.slaves[p] as usize].r.payload.as_ref()
    }
    #[inline]
    pub fn m_aw_fire(&self, p: usize) -> Option<&Command> {
        self.links[self.masters[p] as usize].aw.fire()
    }
    #[inline]
    pub fn m_w_fire(&self, p: usize) -> Option<&DataBeat> {
        self.links[self.masters[p] as usize].w.fire()
    }
    #[inline]
    pub fn m_ar_fire(&self, p: usize) -> Option<&Command> {
        self.links[self.masters[p] as usize].ar.fire()
    }
    #[inline]
    pub fn m_aw(&self, p: usize) -> Option<&Command> {
        self.links[self.masters[p] as usize].aw.payload.as_ref()
    }
    #[inline]
    pub fn m_w(&self, p: usize) -> Option<&DataBeat> {
        self.links[self.masters[p] as usize].w.payload.as_ref()
    }
    #[inline]
    pub fn m_ar(&self, p: usize) -> Option<&Command> {
        self.links[self.masters[p] as usize].ar.payload.as_ref()
    }

    #[inline]
    pub fn s_drive_b(&mut self, p: usize, v: Option<ResponseBeat>) {
        let l = self.slaves[p] as usize;
        if update(&mut self.links[l].b.payload, v) {
            let c = self.wake.link_master[l];
            self.wake.push(c);
        }
    }
    #[inline]
    pub fn s_drive_r(&mut self, p: usize, v: Option<ResponseBeat>) {
        let l = self.slaves[p] as usize;
        if update(&mut self.links[l].r.payload, v) {
            let c = self.wake.link_master[l];
            self.wake.push(c);
        }
    }
    #[inline]
    pub fn m_drive_aw(&mut self, p: usize, v: Option<Command>) {
        let l = self.masters[p] as usize;
        if update(&mut self.links[l].aw.payload, v) {
            let c = self.wake.link_slave[l];
            self.wake.push(c);
        }
    }
    #[inline]
    pub fn m_drive_w(&mut self, p: usize, v: Option<DataBeat>) {
        let l = self.masters[p] as usize;
        if update(&mut self.links[l].w.payload, v) {
            let c = self.wake.link_slave[l];
            self.wake.push(c);
        }
    }
    #[inline]
    pub fn m_drive_ar(&mut self, p: usize, v: Option<Command>) {
        let l = self.masters[p] as usize;
        if update(&mut self.links[l].ar.payload, v) {
            let c = self.wake.link_slave[l];
            self.wake.push(c);
        }
    }
}

/// Direction-generic views: commands are AR/AW, responses R/B.
impl Io<'_> {
    #[inline]
    pub fn s_cmd(&self, d: Dir, p: usize) -> Option<&Command> {
        match d {
            Dir::Read => self.s_ar(p),
            Dir::Write => self.s_aw(p),
        }
    }
    #[inline]
    pub fn s_cmd_fire(&self, d: Dir, p: usize) -> Option<&Command> {
        match d {
            Dir::Read => self.s_ar_fire(p),
            Dir::Write => self.s_aw_fire(p),
        }
    }
    #[inline]
    pub fn s_set_cmd_ready(&mut self, d: Dir, p: usize, ready: bool) {
        match d {
            Dir::Read => self.s_set_ar_ready(p, ready),
            Dir::Write => self.s_set_aw_ready(p, ready),
        }
    }
    #[inline]
    pub fn m_drive_cmd(&mut self, d: Dir, p: usize, v: Option<Command>) {
        match d {
            Dir::Read => self.m_drive_ar(p, v),
            Dir::Write => self.m_drive_aw(p, v),
        }
    }
    #[inline]
    pub fn m_cmd_ready(&self, d: Dir, p: usize) -> bool {
        match d {
            Dir::Read => self.m_ar_ready(p),
            Dir::Write => self.m_aw_ready(p),
        }
    }
    #[inline]
    pub fn m_cmd_fire(&self, d: Dir, p: usize) -> Option<&Command> {
        match d {
            Dir::Read => self.m_ar_fire(p),
            Dir::Write => self.m_aw_fire(p),
        }
    }
    #[inline]
    pub fn m_rsp(&self, d: Dir, p: usize) -> Option<&ResponseBeat> {
        match d {
            Dir::Read => self.m_r(p),
            Dir::Write => self.m_b(p),
        }
    }
    #[inline]
    pub fn m_rsp_fire(&self, d: Dir, p: usize) -> Option<&ResponseBeat> {
        match d {
            Dir::Read => self.m_r_fire(p),
            Dir::Write => self.m_b_fire(p),
        }
    }
    #[inline]
    pub fn m_set_rsp_ready(&mut self, d: Dir, p: usize, ready: bool) {
        match d {
            Dir::Read => self.m_set_r_ready(p, ready),
            Dir::Write => self.m_set_b_ready(p, ready),
        }
    }
    #[inline]
    pub fn s_drive_rsp(&mut self, d: Dir, p: usize, v: Option<ResponseBeat>) {
        match d {
            Dir::Read => self.s_drive_r(p, v),
            Dir::Write => self.s_drive_b(p, v),
        }
    }
    #[inline]
    pub fn s_rsp_ready(&self, d: Dir, p: usize) -> bool {
        match d {
            Dir::Read => self.s_r_ready(p),
            Dir::Write => self.s_b_ready(p),
        }
    }
    #[inline]
    pub fn s_rsp_fire(&self, d: Dir, p: usize) -> Option<&ResponseBeat> {
        match d {
            Dir::Read => self.s_r_fire(p),
            Dir::Write => self.s_b_fire(p),
        }
    }
}

/// Per-commit context: cycle number and violation sink.
pub struct Ctx<'a> {
    pub cycle: u64,
    name: &'a str,
    violations: &'a mut Vec<Violation>,
}

impl Ctx<'_> {
    /// Records a violation detected inside the component.
    pub fn report(&mut self, rule: Rule, detail: impl Into<String>) {
        self.violations.push(Violation::new(self.cycle, self.name, rule, detail));
    }
}
