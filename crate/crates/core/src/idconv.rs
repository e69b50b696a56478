//! ID width converters. The remapper compresses a sparse ID space while
//! keeping transactions with distinct IDs independent; the serializer folds
//! a dense ID space onto fewer IDs and orders what shares one.

use std::collections::VecDeque;

use crate::kernel::{Chan, CombPath, Component, Ctx, Io, PortSpec, Side};
use crate::protocol::{Budget, Dir, ResponseBeat, Rule, TransactionId};
use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub in_id: u32,
    pub count: usize,
}

/// One direction of a remapper. The output ID of a transaction is the
/// index of its entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemapTable {
    entries: Vec<Option<Entry>>,
    per_id: usize,
    max_total: usize,
    total: usize,
}

impl RemapTable {
    pub fn new(unique: usize, per_id: usize, max_total: usize) -> Self {
        Self {
            entries: vec![None; unique],
            per_id,
            max_total,
            total: 0,
        }
    }

    /// Output ID for a new transaction, or `None` to stall.
    pub fn lookup(&self, in_id: u32) -> Option<usize> {
        if self.total >= self.max_total {
            return None;
        }
        match self.entries.iter().position(|e| e.is_some_and(|e| e.in_id == in_id)) {
            Some(i) => (self.entries[i].unwrap().count < self.per_id).then_some(i),
            None => self.entries.iter().position(Option::is_none),
        }
    }

    pub fn request(&mut self, in_id: u32) -> Option<usize> {
        let i = self.lookup(in_id)?;
        self.claim(i, in_id);
        Some(i)
    }

    /// Adds a transaction to entry `i`, which must be free or hold `in_id`.
    pub fn claim(&mut self, i: usize, in_id: u32) {
        let e = self.entries[i].get_or_insert(Entry { in_id, count: 0 });
        debug_assert_eq!(e.in_id, in_id);
        e.count += 1;
        self.total += 1;
    }

    /// Input ID of a response; `None` if the entry is idle.
    pub fn peek(&self, out_id: usize) -> Option<u32> {
        self.entries.get(out_id).copied().flatten().map(|e| e.in_id)
    }

    pub fn response(&mut self, out_id: usize, last: bool) -> Option<u32> {
        let e = self.entries.get_mut(out_id)?.as_mut()?;
        let in_id = e.in_id;
        if last {
            e.count -= 1;
            self.total -= 1;
            if e.count == 0 {
                self.entries[out_id] = None;
            }
        }
        Some(in_id)
    }

    pub fn entries(&self) -> &[Option<Entry>] {
        &self.entries
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RemapConfig {
    pub data_bytes: usize,
    pub in_bits: u8,
    pub out_bits: u8,
    /// Table entries per direction (U).
    pub unique: usize,
    /// Outstanding transactions per entry (T).
    pub per_id: usize,
    /// Outstanding transactions per direction.
    pub max_total: usize,
}

impl RemapConfig {
    pub fn new(data_bytes: usize, in_bits: u8, out_bits: u8, unique: usize, per_id: usize) -> Self {
        Self {
            data_bytes,
            in_bits,
            out_bits,
            unique,
            per_id,
            max_total: unique * per_id,
        }
    }

    pub fn from_budget(data_bytes: usize, in_bits: u8, out_bits: u8, b: Budget) -> Result<Self, ConfigError> {
        let c = Self {
            max_total: b.total,
            ..Self::new(data_bytes, in_bits, out_bits, b.unique_ids, b.per_id)
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.unique == 0 || self.per_id == 0 || self.max_total == 0 {
            return Err(ConfigError::invalid("remap budget must be at least 1"));
        }
        if self.out_bits > 16 || self.unique > 1 << self.out_bits {
            return Err(ConfigError::invalid(format!(
                "{} remap entries do not fit in {} output ID bits",
                self.unique, self.out_bits
            )));
        }
        Ok(())
    }
}

fn id_paths() -> Vec<CombPath> {
    let mut v = Vec::new();
    for c in Chan::ALL {
        if c.is_request() {
            v.extend(CombPath::through(c, (Side::Slave, 0), (Side::Master, 0)));
        } else {
            v.extend(CombPath::through(c, (Side::Master, 0), (Side::Slave, 0)));
        }
    }
    v
}

/// Remapper with a table lookup in the command path.
pub struct Remapper {
    cfg: RemapConfig,
    tables: [RemapTable; 2],
    /// Output ID chosen in the last `eval`.
    chosen: [Option<usize>; 2],
    /// Output ID of a stalled command, kept so that its payload stays stable.
    held: [Option<usize>; 2],
}

impl Remapper {
    pub fn new(cfg: RemapConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let t = RemapTable::new(cfg.unique, cfg.per_id, cfg.max_total);
        Ok(Self {
            tables: [t.clone(), t],
            chosen: [None, None],
            held: [None, None],
            cfg,
        })
    }

    pub fn table(&self, d: Dir) -> &RemapTable {
        &self.tables[d.index()]
    }
}

impl Component for Remapper {
    fn kind(&self) -> &'static str {
        "remap"
    }

    fn slave_ports(&self) -> Vec<PortSpec> {
        vec![PortSpec::new(self.cfg.data_bytes, self.cfg.in_bits)]
    }

    fn master_ports(&self) -> Vec<PortSpec> {
        vec![PortSpec::new(self.cfg.data_bytes, self.cfg.out_bits)]
    }

    fn comb_paths(&self) -> Vec<CombPath> {
        id_paths()
    }

    fn eval(&mut self, io: &mut Io<'_>) {
        for d in Dir::BOTH {
            let di = d.index();
            let cmd = io.s_cmd(d, 0).copied();
            let out = cmd.and_then(|c| self.held[di].or_else(|| self.tables[di].lookup(c.id.value())));
            self.chosen[di] = out;
            io.m_drive_cmd(
                d,
                0,
                cmd.filter(|_| out.is_some()).map(|mut c| {
                    c.id = TransactionId::masked(out.unwrap() as u32, self.cfg.out_bits);
                    c
                }),
            );
            let ready = out.is_some() && io.m_cmd_ready(d, 0);
            io.s_set_cmd_ready(d, 0, ready);

            let rsp = io.m_rsp(d, 0);
            let known = rsp.map(|r| self.tables[di].peek(r.id.value() as usize));
            let restored = match (rsp, known) {
                (Some(r), Some(Some(in_id))) => Some(ResponseBeat {
                    id: TransactionId::masked(in_id, self.cfg.in_bits),
                    ..r.clone()
                }),
                _ => None,
            };
            let orphan = matches!(known, Some(None));
            io.s_drive_rsp(d, 0, restored);
            let ready = orphan || io.s_rsp_ready(d, 0);
            io.m_set_rsp_ready(d, 0, ready);
        }
        let w = io.s_w(0).cloned();
        io.m_drive_w(0, w);
        let ready = io.m_w_ready(0);
        io.s_set_w_ready(0, ready);
    }

    fn commit(&mut self, io: &Io<'_>, ctx: &mut Ctx<'_>) {
        for d in Dir::BOTH {
            let di = d.index();
            self.held[di] = None;
            if let Some(c) = io.s_cmd_fire(d, 0) {
                self.tables[di].claim(self.chosen[di].unwrap(), c.id.value());
            } else if io.s_cmd(d, 0).is_some() {
                self.held[di] = self.chosen[di];
            }
            if let Some(r) = io.m_rsp_fire(d, 0) {
                if self.tables[di].response(r.id.value() as usize, r.last).is_none() {
                    ctx.report(Rule::Orphan, format!("{d} response for idle output ID {}", r.id));
                }
            }
        }
    }

    fn busy(&self) -> bool {
        !self.tables.iter().all(RemapTable::is_empty)
    }

    fn describe(&self) -> String {
        format!("reads {} writes {}", self.tables[0].total(), self.tables[1].total())
    }
}

/// Default lane assignment: the ID modulo the number of output IDs.
pub fn serialize_assign(in_id: u32, out_bits: u8) -> u32 {
    if out_bits >= 32 {
        in_id
    } else {
        in_id & ((1u32 << out_bits) - 1)
    }
}

pub type AssignFn = Box<dyn Fn(u32) -> u32 + Send>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SerializerConfig {
    pub data_bytes: usize,
    pub in_bits: u8,
    pub out_bits: u8,
    /// Outstanding transactions per lane and direction (T).
    pub depth: usize,
}

/// Serializer: one FIFO of original IDs per output ID and direction.
pub struct Serializer {
    cfg: SerializerConfig,
    assign: AssignFn,
    lanes: [Vec<VecDeque<TransactionId>>; 2],
    chosen: [Option<usize>; 2],
}

impl Serializer {
    pub fn new(cfg: SerializerConfig) -> Result<Self, ConfigError> {
        let bits = cfg.out_bits;
        Self::with_assign(cfg, Box::new(move |id| serialize_assign(id, bits)))
    }

    pub fn with_assign(cfg: SerializerConfig, assign: AssignFn) -> Result<Self, ConfigError> {
        if cfg.depth == 0 {
            return Err(ConfigError::invalid("serializer depth must be at least 1"));
        }
        if cfg.out_bits > 12 {
            return Err(ConfigError::invalid("serializer supports at most 12 output ID bits"));
        }
        let n = 1usize << cfg.out_bits;
        Ok(Self {
            lanes: [vec![VecDeque::new(); n], vec![VecDeque::new(); n]],
            chosen: [None, None],
            assign,
            cfg,
        })
    }

    pub fn lane(&self, d: Dir, k: usize) -> impl Iterator<Item = TransactionId> + '_ {
        self.lanes[d.index()][k].iter().copied()
    }

    fn lane_of(&self, id: TransactionId) -> usize {
        (self.assign)(id.value()) as usize % self.lanes[0].len()
    }
}

impl Component for Serializer {
    fn kind(&self) -> &'static str {
        "serialize"
    }

    fn slave_ports(&self) -> Vec<PortSpec> {
        vec![PortSpec::new(self.cfg.data_bytes, self.cfg.in_bits)]
    }

    fn master_ports(&self) -> Vec<PortSpec> {
        vec![PortSpec::new(self.cfg.data_bytes, self.cfg.out_bits)]
    }

    fn comb_paths(&self) -> Vec<CombPath> {
        id_paths()
    }

    fn eval(&mut self, io: &mut Io<'_>) {
        for d in Dir::BOTH {
            let di = d.index();
            let cmd = io.s_cmd(d, 0).copied();
            let k = cmd
                .map(|c| self.lane_of(c.id))
                .filter(|&k| self.lanes[di][k].len() < self.cfg.depth);
            self.chosen[di] = k;
            io.m_drive_cmd(
                d,
                0,
                cmd.filter(|_| k.is_some()).map(|mut c| {
                    c.id = TransactionId::masked(k.unwrap() as u32, self.cfg.out_bits);
                    c
                }),
            );
            let ready = k.is_some() && io.m_cmd_ready(d, 0);
            io.s_set_cmd_ready(d, 0, ready);

            let rsp = io.m_rsp(d, 0);
            let front = rsp.map(|r| {
                self.lanes[di]
                    .get(r.id.value() as usize)
                    .and_then(|l| l.front().copied())
            });
            let restored = match (rsp, front) {
                (Some(r), Some(Some(id))) => Some(ResponseBeat { id, ..r.clone() }),
                _ => None,
            };
            io.s_drive_rsp(d, 0, restored);
            let ready = matches!(front, Some(None)) || io.s_rsp_ready(d, 0);
            io.m_set_rsp_ready(d, 0, ready);
        }
        let w = io.s_w(0).cloned();
        io.m_drive_w(0, w);
        let ready = io.m_w_ready(0);
        io.s_set_w_ready(0, ready);
    }

    fn commit(&mut self, io: &Io<'_>, ctx: &mut Ctx<'_>) {
        for d in Dir::BOTH {
            let di = d.index();
            if let Some(c) = io.s_cmd_fire(d, 0) {
                let k = self.chosen[di].expect("handshake on a full lane");
                self.lanes[di][k].push_back(c.id);
            }
            if let Some(r) = io.m_rsp_fire(d, 0) {
                match self.lanes[di].get_mut(r.id.value() as usize) {
                    Some(l) if !l.is_empty() => {
                        if r.last {
                            l.pop_front();
                        }
                    }
                    _ => ctx.report(Rule::Orphan, format!("{d} response for idle lane {}", r.id)),
                }
            }
        }
    }

    fn busy(&self) -> bool {
        self.lanes.iter().flatten().any(|l| !l.is_empty())
    }

    fn describe(&self) -> String {
        let n = |d: usize| self.lanes[d].iter().map(VecDeque::len).sum::<usize>();
        format!("reads {} writes {}", n(0), n(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remap_reuses_entry_for_same_id() {
        let mut t = RemapTable::new(4, 2, 8);
        assert_eq!(t.request(0x2A), Some(0));
        assert_eq!(t.request(0x2A), Some(0));
        assert_eq!(t.entries()[0], Some(Entry { in_id: 0x2A, count: 2 }));
        assert_eq!(t.request(0x2A), None);
        assert_eq!(t.response(0, true), Some(0x2A));
        assert_eq!(t.response(0, false), Some(0x2A));
        assert_eq!(t.response(0, true), Some(0x2A));
        assert!(t.is_empty());
        assert_eq!(t.response(0, true), None);
    }

    #[test]
    fn remap_stalls_when_full() {
        let mut t = RemapTable::new(4, 2, 8);
        for i in 0..4 {
            assert_eq!(t.request(i * 7), Some(i as usize));
        }
        assert_eq!(t.lookup(99), None);
        t.response(2, true);
        assert_eq!(t.request(99), Some(2));
    }

    #[test]
    fn remap_total_cap() {
        let mut t = RemapTable::new(4, 8, 3);
        t.request(1);
        t.request(1);
        t.request(2);
        assert_eq!(t.lookup(3), None);
        assert_eq!(t.lookup(1), None);
    }

    #[test]
    fn budget_checks() {
        let b = |u, t, n| Budget {
            unique_ids: u,
            per_id: t,
            total: n,
        };
        assert!(RemapConfig::from_budget(8, 6, 2, b(4, 2, 8)).is_ok());
        assert!(RemapConfig::from_budget(8, 6, 2, b(5, 2, 8)).is_err());
        assert!(RemapConfig::from_budget(8, 6, 2, b(0, 2, 8)).is_err());
    }

    #[test]
    fn assign_modulo() {
        assert_eq!(serialize_assign(6, 2), 2);
        assert_eq!(serialize_assign(6, 0), 0);
        assert_eq!(serialize_assign(5, 1), serialize_assign(9, 1));
    }
}
