use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use super::{Command, DataBeat, Dir, ResponseBeat};
use crate::kernel::{Chan, LinkSignals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    /// Valid or payload changed while waiting for a handshake.
    Stability,
    /// Responses with equal direction and ID left command order.
    Order,
    /// Write data bursts interleaved or left command order.
    WriteInterleave,
    /// A response matched no outstanding command.
    Orphan,
    /// Wrong beat count, misplaced last flag, or response before data.
    Burst,
    /// A command or beat broke the link's static invariants.
    Command,
    /// Concurrency exceeded the link's configured budget.
    Budget,
    /// Functional mismatch against a reference model.
    Data,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::Stability => "F1",
            Rule::Order => "R2",
            Rule::WriteInterleave => "R3",
            Rule::Orphan => "ORPHAN",
            Rule::Burst => "BURST",
            Rule::Command => "CMD",
            Rule::Budget => "BUDGET",
            Rule::Data => "DATA",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub cycle: u64,
    pub link: String,
    pub rule: Rule,
    pub detail: String,
}

impl Violation {
    pub fn new(cycle: u64, link: &str, rule: Rule, detail: impl Into<String>) -> Self {
        Self {
            cycle,
            link: link.to_string(),
            rule,
            detail: detail.into(),
        }
    }

    /// `cycle,link,rule,detail`, with commas in free text replaced.
    pub fn to_record(&self) -> String {
        format!(
            "{},{},{},{}",
            self.cycle,
            self.link.replace(',', ";"),
            self.rule,
            self.detail.replace(',', ";").replace('\n', " ")
        )
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_record())
    }
}

/// Checks the stability rule on one channel, one cycle at a time.
#[derive(Debug, Clone)]
pub struct StabilityChecker<P> {
    stalled: Option<P>,
}

impl<P> Default for StabilityChecker<P> {
    fn default() -> Self {
        Self { stalled: None }
    }
}

impl<P: Clone + PartialEq> StabilityChecker<P> {
    /// Observes the channel in one cycle. Returns a description of the
    /// violation if the previous cycle stalled and this one differs.
    pub fn observe(&mut self, payload: Option<&P>, ready: bool) -> Option<&'static str> {
        let verdict = match (&self.stalled, payload) {
            (Some(_), None) => Some("valid retracted before handshake"),
            (Some(prev), Some(now)) if prev != now => Some("payload changed before handshake"),
            _ => None,
        };
        self.stalled = match payload {
            Some(p) if !ready => Some(p.clone()),
            _ => None,
        };
        verdict
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<P> {
    pub cycle: u64,
    pub valid: bool,
    pub ready: bool,
    pub payload: Option<P>,
}

pub type ChannelTrace<P> = Vec<Sample<P>>;

/// Recorded samples of all five channels of one link.
#[derive(Debug, Clone, Default)]
pub struct LinkTrace {
    pub aw: ChannelTrace<Command>,
    pub w: ChannelTrace<DataBeat>,
    pub b: ChannelTrace<ResponseBeat>,
    pub ar: ChannelTrace<Command>,
    pub r: ChannelTrace<ResponseBeat>,
}

impl LinkTrace {
    pub fn record(&mut self, cycle: u64, sig: &LinkSignals) {
        fn push<P: Clone>(t: &mut ChannelTrace<P>, cycle: u64, p: &Option<P>, ready: bool) {
            t.push(Sample {
                cycle,
                valid: p.is_some(),
                ready,
                payload: p.clone(),
            });
        }
        push(&mut self.aw, cycle, &sig.aw.payload, sig.aw.ready);
        push(&mut self.w, cycle, &sig.w.payload, sig.w.ready);
        push(&mut self.b, cycle, &sig.b.payload, sig.b.ready);
        push(&mut self.ar, cycle, &sig.ar.payload, sig.ar.ready);
        push(&mut self.r, cycle, &sig.r.payload, sig.r.ready);
    }
}

fn check_channel<P: Clone + PartialEq>(
    trace: &ChannelTrace<P>,
    link: &str,
    chan: &str,
    out: &mut Vec<Violation>,
) {
    let mut checker = StabilityChecker::default();
    let mut last_cycle: Option<u64> = None;
    for s in trace {
        if let Some(prev) = last_cycle {
            if s.cycle <= prev {
                out.push(Violation::new(
                    s.cycle,
                    link,
                    Rule::Command,
                    format!("{chan}: trace cycles not increasing"),
                ));
            } else if s.cycle != prev + 1 {
                // A gap in the trace: the rule cannot be checked across it.
                checker = StabilityChecker::default();
            }
        }
        last_cycle = Some(s.cycle);
        let payload = if s.valid { s.payload.as_ref() } else { None };
        if s.valid && payload.is_none() {
            out.push(Violation::new(s.cycle, link, Rule::Command, format!("{chan}: valid without payload")));
        }
        if let Some(what) = checker.observe(payload, s.ready) {
            out.push(Violation::new(s.cycle, link, Rule::Stability, format!("{chan}: {what}")));
        }
    }
}

/// Offline stability check over a recorded trace.
///
/// The acyclicity rule (valid must not wait for ready) is structural and is
/// enforced when a netlist is built, not here.
pub fn check_handshakes(trace: &LinkTrace, link: &str) -> Vec<Violation> {
    let mut out = Vec::new();
    check_channel(&trace.aw, link, "aw", &mut out);
    check_channel(&trace.w, link, "w", &mut out);
    check_channel(&trace.b, link, "b", &mut out);
    check_channel(&trace.ar, link, "ar", &mut out);
    check_channel(&trace.r, link, "r", &mut out);
    out.sort_by_key(|v| v.cycle);
    out
}

/// A handshake observed on a link.
#[derive(Debug, Clone, Copy)]
pub enum LinkEvent<'a> {
    Command(&'a Command),
    WriteData(&'a DataBeat),
    WriteResponse(&'a ResponseBeat),
    ReadResponse(&'a ResponseBeat),
}

/// Feeds one cycle's handshakes into a scoreboard.
pub fn check_ordering(
    sb: &mut OrderingScoreboard,
    cycle: u64,
    link: &str,
    events: &[LinkEvent<'_>],
) -> Vec<Violation> {
    let mut out = Vec::new();
    for ev in events {
        sb.observe(cycle, link, *ev, &mut out);
    }
    out
}

#[derive(Debug, Clone)]
struct Txn {
    tag: u64,
    beats: usize,
    seen: usize,
    data_done: bool,
    issued: u64,
}

#[derive(Debug, Clone)]
struct WriteBurst {
    tag: u64,
    expected: Option<usize>,
    id: Option<u32>,
    seen: usize,
}

/// Maximum concurrency observed on a link, per direction (read, write).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConcurrencyStats {
    pub max_unique_ids: [usize; 2],
    pub max_per_id: [usize; 2],
    pub max_total: [usize; 2],
}

/// Tracks outstanding transactions on one link and checks the ordering
/// rules against them.
#[derive(Debug, Clone, Default)]
pub struct OrderingScoreboard {
    queues: BTreeMap<(Dir, u32), VecDeque<Txn>>,
    /// Write commands whose data burst has not started: (tag, beats, id).
    aw_waiting: VecDeque<(u64, usize, u32)>,
    /// Data bursts completed before their command: (tag, beats).
    w_early: VecDeque<(u64, usize)>,
    w_current: Option<WriteBurst>,
    outstanding: [usize; 2],
    unique: [usize; 2],
    issued: [u64; 2],
    completed: [u64; 2],
    stats: ConcurrencyStats,
    latency: BTreeMap<u64, u64>,
}

impl OrderingScoreboard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn outstanding(&self) -> usize {
        self.outstanding[0] + self.outstanding[1]
    }

    pub fn outstanding_dir(&self, dir: Dir) -> usize {
        self.outstanding[dir.index()]
    }

    pub fn issued(&self, dir: Dir) -> u64 {
        self.issued[dir.index()]
    }

    pub fn completed(&self, dir: Dir) -> u64 {
        self.completed[dir.index()]
    }

    pub fn stats(&self) -> ConcurrencyStats {
        self.stats
    }

    /// Command-to-last-response latency histogram.
    pub fn latency(&self) -> &BTreeMap<u64, u64> {
        &self.latency
    }

    /// Outstanding transactions as `(dir, id, tag)`, oldest first per ID.
    pub fn dump(&self) -> Vec<(Dir, u32, u64)> {
        self.queues
            .iter()
            .flat_map(|(&(d, id), q)| q.iter().map(move |t| (d, id, t.tag)))
            .collect()
    }

    pub fn observe(&mut self, cycle: u64, link: &str, ev: LinkEvent<'_>, out: &mut Vec<Violation>) {
        match ev {
            LinkEvent::Command(c) => self.on_command(cycle, link, c, out),
            LinkEvent::WriteData(w) => self.on_write_data(cycle, link, w, out),
            LinkEvent::WriteResponse(b) => self.on_write_response(cycle, link, b, out),
            LinkEvent::ReadResponse(r) => self.on_read_response(cycle, link, r, out),
        }
    }

    fn on_command(&mut self, cycle: u64, link: &str, c: &Command, out: &mut Vec<Violation>) {
        let d = c.dir.index();
        let mut txn = Txn {
            tag: c.tag,
            beats: c.beats(),
            seen: 0,
            data_done: false,
            issued: cycle,
        };
        if c.dir == Dir::Write {
            if let Some((tag, seen)) = self.w_early.pop_front() {
                if tag != c.tag {
                    out.push(Violation::new(
                        cycle,
                        link,
                        Rule::WriteInterleave,
                        format!("data burst {tag:#x} arrived ahead of command {:#x}", c.tag),
                    ));
                }
                if seen != txn.beats {
                    out.push(Violation::new(
                        cycle,
                        link,
                        Rule::Burst,
                        format!("write {:#x} carried {seen} data beats, command has {}", c.tag, txn.beats),
                    ));
                }
                txn.data_done = true;
            } else if let Some(cur) = self.w_current.as_mut().filter(|w| w.expected.is_none()) {
                if cur.tag != c.tag {
                    out.push(Violation::new(
                        cycle,
                        link,
                        Rule::WriteInterleave,
                        format!("data burst {:#x} arrived ahead of command {:#x}", cur.tag, c.tag),
                    ));
                }
                cur.expected = Some(txn.beats);
                cur.id = Some(c.id.value());
            } else {
                self.aw_waiting.push_back((c.tag, txn.beats, c.id.value()));
            }
        }
        let q = self.queues.entry((c.dir, c.id.value())).or_default();
        if q.is_empty() {
            self.unique[d] += 1;
        }
        q.push_back(txn);
        let per_id = q.len();
        self.outstanding[d] += 1;
        self.issued[d] += 1;
        let s = &mut self.stats;
        s.max_unique_ids[d] = s.max_unique_ids[d].max(self.unique[d]);
        s.max_per_id[d] = s.max_per_id[d].max(per_id);
        s.max_total[d] = s.max_total[d].max(self.outstanding[d]);
    }

    fn on_write_data(&mut self, cycle: u64, link: &str, w: &DataBeat, out: &mut Vec<Violation>) {
        if self.w_current.is_none() {
            let (expected, id) = match self.aw_waiting.pop_front() {
                Some((tag, beats, id)) => {
                    if tag != w.tag {
                        out.push(Violation::new(
                            cycle,
                            link,
                            Rule::WriteInterleave,
                            format!("data burst {:#x} does not follow command order, expected {tag:#x}", w.tag),
                        ));
                    }
                    (Some(beats), Some(id))
                }
                None => (None, None),
            };
            self.w_current = Some(WriteBurst {
                tag: w.tag,
                expected,
                id,
                seen: 0,
            });
        }
        let cur = self.w_current.as_mut().expect("burst just opened");
        if cur.tag != w.tag {
            out.push(Violation::new(
                cycle,
                link,
                Rule::WriteInterleave,
                format!("write burst {:#x} interleaved with beat of {:#x}", cur.tag, w.tag),
            ));
        }
        cur.seen += 1;
        if let Some(e) = cur.expected {
            if cur.seen == e + 1 && !w.last {
                out.push(Violation::new(
                    cycle,
                    link,
                    Rule::Burst,
                    format!("write {:#x} exceeded {e} data beats without last", cur.tag),
                ));
            }
        }
        if !w.last {
            return;
        }
        let cur = self.w_current.take().expect("burst open");
        match (cur.expected, cur.id) {
            (Some(e), Some(id)) => {
                if cur.seen != e {
                    out.push(Violation::new(
                        cycle,
                        link,
                        Rule::Burst,
                        format!("write {:#x} carried {} data beats, command has {e}", cur.tag, cur.seen),
                    ));
                }
                if let Some(q) = self.queues.get_mut(&(Dir::Write, id)) {
                    if let Some(t) = q.iter_mut().find(|t| t.tag == cur.tag && !t.data_done) {
                        t.data_done = true;
                    }
                }
            }
            _ => self.w_early.push_back((cur.tag, cur.seen)),
        }
    }

    fn take_txn(
        &mut self,
        cycle: u64,
        link: &str,
        dir: Dir,
        id: u32,
        tag: u64,
        out: &mut Vec<Violation>,
    ) -> Option<usize> {
        let Some(q) = self.queues.get(&(dir, id)) else {
            out.push(Violation::new(
                cycle,
                link,
                Rule::Orphan,
                format!("{dir} response for ID {id:#x} with nothing outstanding"),
            ));
            return None;
        };
        match q.iter().position(|t| t.tag == tag) {
            Some(pos) => Some(pos),
            None => {
                out.push(Violation::new(
                    cycle,
                    link,
                    Rule::Orphan,
                    format!("{dir} response {tag:#x} on ID {id:#x} matches no outstanding command"),
                ));
                None
            }
        }
    }

    fn retire(&mut self, cycle: u64, dir: Dir, id: u32, pos: usize) {
        let d = dir.index();
        let q = self.queues.get_mut(&(dir, id)).expect("queue exists");
        let t = q.remove(pos).expect("position valid");
        if q.is_empty() {
            self.queues.remove(&(dir, id));
            self.unique[d] -= 1;
        }
        self.outstanding[d] -= 1;
        self.completed[d] += 1;
        *self.latency.entry(cycle - t.issued).or_default() += 1;
    }

    fn on_write_response(&mut self, cycle: u64, link: &str, b: &ResponseBeat, out: &mut Vec<Violation>) {
        let id = b.id.value();
        let Some(pos) = self.take_txn(cycle, link, Dir::Write, id, b.tag, out) else {
            return;
        };
        if pos != 0 {
            out.push(Violation::new(
                cycle,
                link,
                Rule::Order,
                format!("write response {:#x} on ID {id:#x} overtook {pos} earlier write(s)", b.tag),
            ));
        }
        let q = &self.queues[&(Dir::Write, id)];
        if !q[pos].data_done {
            out.push(Violation::new(
                cycle,
                link,
                Rule::Burst,
                format!("write response {:#x} before its last data beat", b.tag),
            ));
        }
        if !b.last {
            out.push(Violation::new(cycle, link, Rule::Burst, "write response without last flag"));
        }
        self.retire(cycle, Dir::Write, id, pos);
    }

    fn on_read_response(&mut self, cycle: u64, link: &str, r: &ResponseBeat, out: &mut Vec<Violation>) {
        let id = r.id.value();
        let Some(pos) = self.take_txn(cycle, link, Dir::Read, id, r.tag, out) else {
            return;
        };
        let q = self.queues.get_mut(&(Dir::Read, id)).expect("queue exists");
        let t = &mut q[pos];
        if pos != 0 && t.seen == 0 {
            out.push(Violation::new(
                cycle,
                link,
                Rule::Order,
                format!("read response {:#x} on ID {id:#x} overtook {pos} earlier read(s)", r.tag),
            ));
        }
        t.seen += 1;
        if r.last {
            if t.seen != t.beats {
                out.push(Violation::new(
                    cycle,
                    link,
                    Rule::Burst,
                    format!("read {:#x} ended after {} of {} beats", r.tag, t.seen, t.beats),
                ));
            }
            self.retire(cycle, Dir::Read, id, pos);
        } else if t.seen == t.beats {
            out.push(Violation::new(
                cycle,
                link,
                Rule::Burst,
                format!("read {:#x} final beat lacks last flag", r.tag),
            ));
        }
    }
}

/// Concurrency budget of a link: unique IDs / transactions per ID / total,
/// per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub unique_ids: usize,
    pub per_id: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    /// Handshakes per channel, indexed by [`Chan`].
    pub beats: [u64; 5],
    /// Cycles with valid high and ready low, per channel.
    pub stalls: [u64; 5],
    /// Data beats announced by accepted commands, per direction.
    pub requested: [u64; 2],
    pub cycles: u64,
}

/// Runtime monitor attached to one link.
#[derive(Debug, Clone)]
pub struct LinkMonitor {
    name: String,
    data_bytes: usize,
    id_bits: u8,
    budget: Option<Budget>,
    aw: StabilityChecker<Command>,
    w: StabilityChecker<DataBeat>,
    b: StabilityChecker<ResponseBeat>,
    ar: StabilityChecker<Command>,
    r: StabilityChecker<ResponseBeat>,
    scoreboard: OrderingScoreboard,
    stats: LinkStats,
}

impl LinkMonitor {
    pub fn new(name: impl Into<String>, data_bytes: usize, id_bits: u8) -> Self {
        Self {
            name: name.into(),
            data_bytes,
            id_bits,
            budget: None,
            aw: StabilityChecker::default(),
            w: StabilityChecker::default(),
            b: StabilityChecker::default(),
            ar: StabilityChecker::default(),
            r: StabilityChecker::default(),
            scoreboard: OrderingScoreboard::new(),
            stats: LinkStats::default(),
        }
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn budget(&self) -> Option<Budget> {
        self.budget
    }

    pub fn scoreboard(&self) -> &OrderingScoreboard {
        &self.scoreboard
    }

    pub fn stats(&self) -> &LinkStats {
        &self.stats
    }

    pub fn observe(&mut self, cycle: u64, sig: &LinkSignals, out: &mut Vec<Violation>) {
        self.stats.cycles += 1;
        let name = self.name.as_str();
        let mut stab = |what: Option<&'static str>, chan: &str| {
            if let Some(w) = what {
                out.push(Violation::new(cycle, name, Rule::Stability, format!("{chan}: {w}")));
            }
        };
        stab(self.aw.observe(sig.aw.payload.as_ref(), sig.aw.ready), "aw");
        stab(self.w.observe(sig.w.payload.as_ref(), sig.w.ready), "w");
        stab(self.b.observe(sig.b.payload.as_ref(), sig.b.ready), "b");
        stab(self.ar.observe(sig.ar.payload.as_ref(), sig.ar.ready), "ar");
        stab(self.r.observe(sig.r.payload.as_ref(), sig.r.ready), "r");

        let valid = [
            sig.aw.payload.is_some(),
            sig.w.payload.is_some(),
            sig.b.payload.is_some(),
            sig.ar.payload.is_some(),
            sig.r.payload.is_some(),
        ];
        let ready = [sig.aw.ready, sig.w.ready, sig.b.ready, sig.ar.ready, sig.r.ready];
        for c in 0..5 {
            if valid[c] {
                if ready[c] {
                    self.stats.beats[c] += 1;
                } else {
                    self.stats.stalls[c] += 1;
                }
            }
        }

        if let Some(c) = sig.aw.fire() {
            self.check_command(cycle, c, out);
        }
        if let Some(c) = sig.ar.fire() {
            self.check_command(cycle, c, out);
        }
        if let Some(w) = sig.w.fire() {
            if self.data_bytes < 128 && w.strb >> self.data_bytes != 0 {
                out.push(Violation::new(cycle, &self.name, Rule::Command, "write strobe outside data width"));
            }
            self.scoreboard.observe(cycle, &self.name, LinkEvent::WriteData(w), out);
        }
        if let Some(b) = sig.b.fire() {
            self.scoreboard.observe(cycle, &self.name, LinkEvent::WriteResponse(b), out);
        }
        if let Some(r) = sig.r.fire() {
            if r.data.len() != self.data_bytes {
                out.push(Violation::new(
                    cycle,
                    &self.name,
                    Rule::Command,
                    format!("read beat carries {} bytes on a {}-byte link", r.data.len(), self.data_bytes),
                ));
            }
            self.scoreboard.observe(cycle, &self.name, LinkEvent::ReadResponse(r), out);
        }
    }

    fn check_command(&mut self, cycle: u64, c: &Command, out: &mut Vec<Violation>) {
        self.stats.requested[c.dir.index()] += c.beats() as u64;
        if let Err(e) = c.validate(self.data_bytes) {
            out.push(Violation::new(cycle, &self.name, Rule::Command, e.to_string()));
        }
        if self.id_bits < 32 && (c.id.value() as u64) >= (1u64 << self.id_bits) {
            out.push(Violation::new(
                cycle,
                &self.name,
                Rule::Command,
                format!("ID {:#x} wider than the link's {} bits", c.id.value(), self.id_bits),
            ));
        }
        self.scoreboard.observe(cycle, &self.name, LinkEvent::Command(c), out);
        if let Some(b) = self.budget {
            let d = c.dir.index();
            let sb = &self.scoreboard;
            let per_id = sb.queues.get(&(c.dir, c.id.value())).map_or(0, |q| q.len());
            if sb.unique[d] > b.unique_ids || per_id > b.per_id || sb.outstanding[d] > b.total {
                out.push(Violation::new(
                    cycle,
                    &self.name,
                    Rule::Budget,
                    format!(
                        "{} concurrency {}/{}/{} exceeds budget {}/{}/{}",
                        c.dir, sb.unique[d], per_id, sb.outstanding[d], b.unique_ids, b.per_id, b.total
                    ),
                ));
            }
        }
    }
}

impl Chan {
    pub fn name(self) -> &'static str {
        match self {
            Chan::Aw => "aw",
            Chan::W => "w",
            Chan::B => "b",
            Chan::Ar => "ar",
            Chan::R => "r",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{Resp, TransactionId};
    use bytes::Bytes;

    fn id(v: u32) -> TransactionId {
        TransactionId::new(v, 4).unwrap()
    }

    fn rd(tag: u64, i: u32, len: u8) -> Command {
        Command::new(Dir::Read, 0, len, 8, id(i)).with_tag(tag)
    }

    fn wr(tag: u64, i: u32, len: u8) -> Command {
        Command::new(Dir::Write, 0, len, 8, id(i)).with_tag(tag)
    }

    fn rbeat(tag: u64, i: u32, last: bool) -> ResponseBeat {
        ResponseBeat {
            id: id(i),
            data: Bytes::from(vec![0u8; 8]),
            resp: Resp::Okay,
            last,
            tag,
        }
    }

    fn wbeat(tag: u64, last: bool) -> DataBeat {
        DataBeat {
            data: Bytes::from(vec![0u8; 8]),
            strb: 0xFF,
            last,
            tag,
        }
    }

    fn trace_of(samples: &[(bool, bool, u32)]) -> LinkTrace {
        let mut t = LinkTrace::default();
        for (cycle, &(valid, ready, payload)) in samples.iter().enumerate() {
            t.ar.push(Sample {
                cycle: cycle as u64,
                valid,
                ready,
                payload: valid.then(|| rd(payload as u64, 0, 0)),
            });
        }
        t
    }

    #[test]
    fn legal_stall_is_clean() {
        let t = trace_of(&[(true, false, 1), (true, false, 1), (true, true, 1)]);
        assert!(check_handshakes(&t, "l").is_empty());
    }

    #[test]
    fn retraction_is_flagged() {
        let t = trace_of(&[(true, false, 1), (false, false, 0)]);
        let v = check_handshakes(&t, "l");
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::Stability);
        assert_eq!(v[0].cycle, 1);
    }

    #[test]
    fn payload_mutation_is_flagged() {
        let t = trace_of(&[(true, false, 1), (true, true, 2)]);
        assert_eq!(check_handshakes(&t, "l")[0].rule, Rule::Stability);
    }

    /// Every two-cycle pattern of (valid, ready, payload in {1,2}) checked
    /// against the rule written out directly: a stall in the first cycle
    /// requires valid and the same payload in the second.
    #[test]
    fn all_two_cycle_patterns() {
        let states: Vec<(bool, bool, u32)> = [false, true]
            .iter()
            .flat_map(|&v| [false, true].iter().flat_map(move |&r| [1u32, 2].map(move |p| (v, r, p))))
            .collect();
        for &a in &states {
            for &b in &states {
                let stalled = a.0 && !a.1;
                let expect = stalled && !(b.0 && b.2 == a.2);
                let got = !check_handshakes(&trace_of(&[a, b]), "l").is_empty();
                assert_eq!(got, expect, "{a:?} -> {b:?}");
            }
        }
    }

    #[test]
    fn same_id_responses_out_of_order() {
        let mut sb = OrderingScoreboard::new();
        let (a, b) = (rd(1, 3, 0), rd(2, 3, 0));
        let (ra, rb) = (rbeat(1, 3, true), rbeat(2, 3, true));
        let v = check_ordering(
            &mut sb,
            0,
            "l",
            &[LinkEvent::Command(&a), LinkEvent::Command(&b), LinkEvent::ReadResponse(&rb), LinkEvent::ReadResponse(&ra)],
        );
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::Order);
        assert_eq!(sb.outstanding(), 0);
    }

    #[test]
    fn different_ids_may_reorder() {
        let mut sb = OrderingScoreboard::new();
        let (a, b) = (rd(1, 3, 0), rd(2, 5, 0));
        let (ra, rb) = (rbeat(1, 3, true), rbeat(2, 5, true));
        let v = check_ordering(
            &mut sb,
            0,
            "l",
            &[LinkEvent::Command(&a), LinkEvent::Command(&b), LinkEvent::ReadResponse(&rb), LinkEvent::ReadResponse(&ra)],
        );
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn interleaved_write_data_is_flagged() {
        let mut sb = OrderingScoreboard::new();
        let (a, b) = (wr(1, 0, 1), wr(2, 1, 1));
        let v = check_ordering(
            &mut sb,
            0,
            "l",
            &[
                LinkEvent::Command(&a),
                LinkEvent::Command(&b),
                LinkEvent::WriteData(&wbeat(1, false)),
                LinkEvent::WriteData(&wbeat(2, false)),
                LinkEvent::WriteData(&wbeat(1, true)),
                LinkEvent::WriteData(&wbeat(2, true)),
            ],
        );
        assert!(v.iter().any(|v| v.rule == Rule::WriteInterleave), "{v:?}");
    }

    #[test]
    fn data_before_command_is_legal() {
        let mut sb = OrderingScoreboard::new();
        let a = wr(7, 0, 1);
        let v = check_ordering(
            &mut sb,
            0,
            "l",
            &[
                LinkEvent::WriteData(&wbeat(7, false)),
                LinkEvent::WriteData(&wbeat(7, true)),
                LinkEvent::Command(&a),
                LinkEvent::WriteResponse(&ResponseBeat::write(id(0), Resp::Okay, 7)),
            ],
        );
        assert!(v.is_empty(), "{v:?}");
        assert_eq!(sb.completed(Dir::Write), 1);
    }

    #[test]
    fn orphan_and_early_response() {
        let mut sb = OrderingScoreboard::new();
        let v = check_ordering(&mut sb, 0, "l", &[LinkEvent::ReadResponse(&rbeat(9, 1, true))]);
        assert_eq!(v[0].rule, Rule::Orphan);
        let a = wr(1, 0, 0);
        let v = check_ordering(
            &mut sb,
            1,
            "l",
            &[LinkEvent::Command(&a), LinkEvent::WriteResponse(&ResponseBeat::write(id(0), Resp::Okay, 1))],
        );
        assert_eq!(v[0].rule, Rule::Burst);
    }

    #[test]
    fn read_beat_count_is_checked() {
        let mut sb = OrderingScoreboard::new();
        let a = rd(1, 0, 2);
        let v = check_ordering(
            &mut sb,
            0,
            "l",
            &[LinkEvent::Command(&a), LinkEvent::ReadResponse(&rbeat(1, 0, false)), LinkEvent::ReadResponse(&rbeat(1, 0, true))],
        );
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::Burst);
    }

    #[test]
    fn concurrency_maxima() {
        let mut sb = OrderingScoreboard::new();
        let cmds = [rd(1, 0, 0), rd(2, 0, 0), rd(3, 1, 0)];
        let evs: Vec<LinkEvent> = cmds.iter().map(LinkEvent::Command).collect();
        check_ordering(&mut sb, 0, "l", &evs);
        let s = sb.stats();
        assert_eq!(s.max_unique_ids[0], 2);
        assert_eq!(s.max_per_id[0], 2);
        assert_eq!(s.max_total[0], 3);
    }

    #[test]
    fn record_format() {
        let v = Violation::new(12, "a->b", Rule::Order, "x, y");
        assert_eq!(v.to_record(), "12,a->b,R2,x; y");
    }
}
