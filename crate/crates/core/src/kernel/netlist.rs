use std::collections::{HashMap, VecDeque};
use std::fmt;

use petgraph::algo::toposort;
use petgraph::graph::{DiGraph, NodeIndex};

use super::{Chan, Component, Ctx, Io, LinkSignals, PortSpec, Side, Sig, Wake};
use crate::protocol::{Budget, LinkMonitor, LinkTrace, Violation};
use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompId(pub usize);

impl CompId {
    /// Master port `i` of this component.
    pub fn m(self, i: usize) -> PortRef {
        PortRef { comp: self, port: i }
    }

    /// Slave port `i` of this component.
    pub fn s(self, i: usize) -> PortRef {
        PortRef { comp: self, port: i }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId(pub usize);

/// A port of a component; whether it is a master or a slave port follows
/// from its position in [`NetlistBuilder::connect`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PortRef {
    pub comp: CompId,
    pub port: usize,
}

struct Entry {
    name: String,
    comp: Box<dyn Component>,
    slave_specs: Vec<PortSpec>,
    master_specs: Vec<PortSpec>,
    slaves: Vec<Option<u32>>,
    masters: Vec<Option<u32>>,
}

struct LinkDef {
    from: PortRef,
    to: PortRef,
    name: String,
    spec: PortSpec,
}

#[derive(Default)]
pub struct NetlistBuilder {
    entries: Vec<Entry>,
    names: HashMap<String, CompId>,
    links: Vec<LinkDef>,
    monitors: HashMap<usize, Option<Budget>>,
    traces: Vec<usize>,
    duplicate: Option<String>,
}

impl NetlistBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, comp: impl Component + 'static) -> CompId {
        self.add_boxed(name, Box::new(comp))
    }

    pub fn add_boxed(&mut self, name: impl Into<String>, comp: Box<dyn Component>) -> CompId {
        let name = name.into();
        let id = CompId(self.entries.len());
        if self.names.insert(name.clone(), id).is_some() && self.duplicate.is_none() {
            self.duplicate = Some(name.clone());
        }
        let slave_specs = comp.slave_ports();
        let master_specs = comp.master_ports();
        self.entries.push(Entry {
            name,
            slaves: vec![None; slave_specs.len()],
            masters: vec![None; master_specs.len()],
            slave_specs,
            master_specs,
            comp,
        });
        id
    }

    pub fn find(&self, name: &str) -> Option<CompId> {
        self.names.get(name).copied()
    }

    pub fn name(&self, id: CompId) -> &str {
        &self.entries[id.0].name
    }

    pub fn master_spec(&self, p: PortRef) -> Option<PortSpec> {
        self.entries.get(p.comp.0)?.master_specs.get(p.port).copied()
    }

    pub fn slave_spec(&self, p: PortRef) -> Option<PortSpec> {
        self.entries.get(p.comp.0)?.slave_specs.get(p.port).copied()
    }

    /// Connects master port `from` to slave port `to`.
    pub fn connect(&mut self, from: PortRef, to: PortRef) -> Result<LinkId, ConfigError> {
        let n = self.entries.len();
        if from.comp.0 >= n || to.comp.0 >= n {
            return Err(ConfigError::invalid("connection refers to an unknown component"));
        }
        let fname = format!("{}.m{}", self.entries[from.comp.0].name, from.port);
        let tname = format!("{}.s{}", self.entries[to.comp.0].name, to.port);
        let name = format!("{fname}->{tname}");
        let mspec = self
            .master_spec(from)
            .ok_or_else(|| ConfigError::invalid(format!("{fname}: no such master port")))?;
        let sspec = self
            .slave_spec(to)
            .ok_or_else(|| ConfigError::invalid(format!("{tname}: no such slave port")))?;
        if self.entries[from.comp.0].masters[from.port].is_some() {
            return Err(ConfigError::DoubleConnect(fname));
        }
        if self.entries[to.comp.0].slaves[to.port].is_some() {
            return Err(ConfigError::DoubleConnect(tname));
        }
        if mspec.data_bytes != sspec.data_bytes {
            return Err(ConfigError::WidthMismatch {
                link: name,
                master: mspec.data_bytes,
                slave: sspec.data_bytes,
            });
        }
        if mspec.id_bits > sspec.id_bits {
            return Err(ConfigError::IdWidthMismatch {
                link: name,
                master: mspec.id_bits,
                slave: sspec.id_bits,
            });
        }
        let id = self.links.len();
        self.entries[from.comp.0].masters[from.port] = Some(id as u32);
        self.entries[to.comp.0].slaves[to.port] = Some(id as u32);
        self.links.push(LinkDef {
            from,
            to,
            name,
            spec: mspec,
        });
        Ok(LinkId(id))
    }

    /// Attaches a protocol monitor to a link, optionally with a
    /// concurrency budget.
    pub fn monitor(&mut self, link: LinkId, budget: Option<Budget>) {
        self.monitors.insert(link.0, budget);
    }

    pub fn monitor_all(&mut self) {
        for l in 0..self.links.len() {
            self.monitors.entry(l).or_insert(None);
        }
    }

    /// Records every cycle of a link into a [`LinkTrace`].
    pub fn trace(&mut self, link: LinkId) {
        if !self.traces.contains(&link.0) {
            self.traces.push(link.0);
        }
    }

    pub fn links(&self) -> impl Iterator<Item = (LinkId, &str)> {
        self.links.iter().enumerate().map(|(i, l)| (LinkId(i), l.name.as_str()))
    }

    pub fn link_ends(&self, link: LinkId) -> (PortRef, PortRef) {
        let l = &self.links[link.0];
        (l.from, l.to)
    }

    pub fn build(self) -> Result<Netlist, ConfigError> {
        if let Some(d) = self.duplicate {
            return Err(ConfigError::invalid(format!("duplicate component name {d}")));
        }
        for e in &self.entries {
            if let Some(i) = e.slaves.iter().position(Option::is_none) {
                return Err(ConfigError::Unconnected(format!("{}.s{i}", e.name)));
            }
            if let Some(i) = e.masters.iter().position(Option::is_none) {
                return Err(ConfigError::Unconnected(format!("{}.m{i}", e.name)));
            }
        }
        self.check_comb_graph()?;

        let n = self.entries.len();
        let mut wake = Wake {
            queue: VecDeque::with_capacity(n),
            queued: vec![false; n],
            reactive: vec![false; n],
            link_master: self.links.iter().map(|l| l.from.comp.0 as u32).collect(),
            link_slave: self.links.iter().map(|l| l.to.comp.0 as u32).collect(),
        };
        for (i, e) in self.entries.iter().enumerate() {
            wake.reactive[i] = !e.comp.comb_paths().is_empty();
        }
        let order = evaluation_order(&self.entries, &self.links);

        let mut monitors: Vec<(usize, LinkMonitor)> = self
            .monitors
            .iter()
            .map(|(&l, &budget)| {
                let d = &self.links[l];
                let mut m = LinkMonitor::new(d.name.clone(), d.spec.data_bytes, d.spec.id_bits);
                if let Some(b) = budget {
                    m = m.with_budget(b);
                }
                (l, m)
            })
            .collect();
        monitors.sort_by_key(|(l, _)| *l);

        let mut names = Vec::with_capacity(n);
        let mut comps = Vec::with_capacity(n);
        let mut ports = Vec::with_capacity(n);
        for e in self.entries {
            names.push(e.name);
            comps.push(e.comp);
            ports.push((
                e.slaves.into_iter().map(|l| l.unwrap()).collect::<Vec<_>>(),
                e.masters.into_iter().map(|l| l.unwrap()).collect::<Vec<_>>(),
            ));
        }
        Ok(Netlist {
            index: self.names,
            names,
            comps,
            ports,
            links: vec![LinkSignals::default(); self.links.len()],
            link_names: self.links.iter().map(|l| l.name.clone()).collect(),
            link_ends: self.links.iter().map(|l| (l.from, l.to)).collect(),
            link_specs: self.links.iter().map(|l| l.spec).collect(),
            wake,
            order,
            monitors,
            traces: self.traces.into_iter().map(|l| (l, LinkTrace::default())).collect(),
            violations: Vec::new(),
            cycle: 0,
            evals: 0,
        })
    }

    fn check_comb_graph(&self) -> Result<(), ConfigError> {
        let node = |link: u32, chan: Chan, sig: Sig| -> NodeIndex {
            NodeIndex::new(link as usize * 10 + chan.index() * 2 + (sig == Sig::Ready) as usize)
        };
        let mut g: DiGraph<(), ()> = DiGraph::with_capacity(self.links.len() * 10, 0);
        for _ in 0..self.links.len() * 10 {
            g.add_node(());
        }
        for e in &self.entries {
            let lookup = |side: Side, port: usize| -> Result<u32, ConfigError> {
                let l = match side {
                    Side::Slave => e.slaves.get(port),
                    Side::Master => e.masters.get(port),
                };
                l.copied()
                    .flatten()
                    .ok_or_else(|| ConfigError::invalid(format!("{}: comb path names missing port {port}", e.name)))
            };
            for p in e.comp.comb_paths() {
                if p.from.sig == Sig::Ready && p.to.sig == Sig::Valid {
                    return Err(ConfigError::ReadyToValid(e.name.clone()));
                }
                let a = node(lookup(p.from.side, p.from.port)?, p.from.chan, p.from.sig);
                let b = node(lookup(p.to.side, p.to.port)?, p.to.chan, p.to.sig);
                g.update_edge(a, b, ());
            }
        }
        toposort(&g, None).map(|_| ()).map_err(|cycle| {
            let i = cycle.node_id().index();
            let (link, rest) = (i / 10, i % 10);
            let chan = Chan::ALL[rest / 2];
            let sig = if rest % 2 == 0 { "valid" } else { "ready" };
            ConfigError::CombinationalLoop(format!("{} {} {sig}", self.links[link].name, chan.name()))
        })
    }
}

/// Breadth-first order from the traffic sources along master-to-slave links.
fn evaluation_order(entries: &[Entry], links: &[LinkDef]) -> Vec<u32> {
    let n = entries.len();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| entries[i].slaves.is_empty()).collect();
    for &i in &queue {
        seen[i] = true;
    }
    loop {
        while let Some(c) = queue.pop_front() {
            order.push(c as u32);
            for l in entries[c].masters.iter().flatten() {
                let t = links[*l as usize].to.comp.0;
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        match (0..n).find(|&i| !seen[i]) {
            Some(i) => {
                seen[i] = true;
                queue.push_back(i);
            }
            None => break,
        }
    }
    order
}

/// The watchdog expired with transactions still in flight.
#[derive(Debug, Clone)]
pub struct Timeout {
    pub cycle: u64,
    pub waited: u64,
    pub dump: String,
}

impl fmt::Display for Timeout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "not drained after {} cycles (cycle {})\n{}", self.waited, self.cycle, self.dump)
    }
}

impl std::error::Error for Timeout {}

pub struct Netlist {
    index: HashMap<String, CompId>,
    names: Vec<String>,
    comps: Vec<Box<dyn Component>>,
    ports: Vec<(Vec<u32>, Vec<u32>)>,
    links: Vec<LinkSignals>,
    link_names: Vec<String>,
    link_ends: Vec<(PortRef, PortRef)>,
    link_specs: Vec<PortSpec>,
    wake: Wake,
    order: Vec<u32>,
    monitors: Vec<(usize, LinkMonitor)>,
    traces: Vec<(usize, LinkTrace)>,
    violations: Vec<Violation>,
    cycle: u64,
    evals: u64,
}

impl Netlist {
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// Total component evaluations so far.
    pub fn evals(&self) -> u64 {
        self.evals
    }

    /// Advances one clock cycle.
    pub fn step(&mut self) {
        let cycle = self.cycle;
        for &c in &self.order {
            self.wake.queued[c as usize] = true;
            self.wake.queue.push_back(c);
        }
        let limit = 64 * self.comps.len() as u64 + 1024;
        let mut n = 0u64;
        while let Some(c) = self.wake.queue.pop_front() {
            let c = c as usize;
            self.wake.queued[c] = false;
            n += 1;
            assert!(
                n <= limit,
                "signals did not settle in cycle {cycle}; last evaluated {}",
                self.names[c]
            );
            let (slaves, masters) = &self.ports[c];
            let mut io = Io {
                links: &mut self.links,
                slaves,
                masters,
                wake: &mut self.wake,
                cycle,
            };
            self.comps[c].eval(&mut io);
        }
        self.evals += n;

        for (l, m) in &mut self.monitors {
            m.observe(cycle, &self.links[*l], &mut self.violations);
        }
        for (l, t) in &mut self.traces {
            t.record(cycle, &self.links[*l]);
        }

        for c in 0..self.comps.len() {
            let (slaves, masters) = &self.ports[c];
            let io = Io {
                links: &mut self.links,
                slaves,
                masters,
                wake: &mut self.wake,
                cycle,
            };
            let mut ctx = Ctx {
                cycle,
                name: &self.names[c],
                violations: &mut self.violations,
            };
            self.comps[c].commit(&io, &mut ctx);
        }
        self.cycle += 1;
    }

    pub fn run(&mut self, cycles: u64) {
        for _ in 0..cycles {
            self.step();
        }
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn take_violations(&mut self) -> Vec<Violation> {
        std::mem::take(&mut self.violations)
    }

    pub fn find(&self, name: &str) -> Option<CompId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: CompId) -> &str {
        &self.names[id.0]
    }

    pub fn component_count(&self) -> usize {
        self.comps.len()
    }

    pub fn component<T: 'static>(&self, id: CompId) -> Option<&T> {
        self.comps.get(id.0)?.as_any().downcast_ref::<T>()
    }

    pub fn component_mut<T: 'static>(&mut self, id: CompId) -> Option<&mut T> {
        self.comps.get_mut(id.0)?.as_any_mut().downcast_mut::<T>()
    }

    /// All components of type `T` with their IDs.
    pub fn components_of<T: 'static>(&self) -> impl Iterator<Item = (CompId, &T)> {
        self.comps
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_any().downcast_ref::<T>().map(|t| (CompId(i), t)))
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn link_name(&self, l: LinkId) -> &str {
        &self.link_names[l.0]
    }

    pub fn link_ends(&self, l: LinkId) -> (PortRef, PortRef) {
        self.link_ends[l.0]
    }

    pub fn link_spec(&self, l: LinkId) -> PortSpec {
        self.link_specs[l.0]
    }

    /// Settled signals of a link in the most recent cycle.
    pub fn signals(&self, l: LinkId) -> &LinkSignals {
        &self.links[l.0]
    }

    /// The link attached to master port `p`.
    pub fn master_link(&self, p: PortRef) -> LinkId {
        LinkId(self.ports[p.comp.0].1[p.port] as usize)
    }

    /// The link attached to slave port `p`.
    pub fn slave_link(&self, p: PortRef) -> LinkId {
        LinkId(self.ports[p.comp.0].0[p.port] as usize)
    }

    pub fn monitors(&self) -> impl Iterator<Item = (LinkId, &LinkMonitor)> {
        self.monitors.iter().map(|(l, m)| (LinkId(*l), m))
    }

    pub fn monitor(&self, l: LinkId) -> Option<&LinkMonitor> {
        self.monitors.iter().find(|(i, _)| *i == l.0).map(|(_, m)| m)
    }

    pub fn trace(&self, l: LinkId) -> Option<&LinkTrace> {
        self.traces.iter().find(|(i, _)| *i == l.0).map(|(_, t)| t)
    }

    pub fn traces(&self) -> impl Iterator<Item = (LinkId, &LinkTrace)> {
        self.traces.iter().map(|(l, t)| (LinkId(*l), t))
    }

    /// Whether any component or monitored link still holds a transaction.
    pub fn busy(&self) -> bool {
        self.comps.iter().any(|c| c.busy()) || self.monitors.iter().any(|(_, m)| m.scoreboard().outstanding() > 0)
    }

    /// Stops all traffic sources.
    pub fn stop_sources(&mut self) {
        for c in &mut self.comps {
            c.stop();
        }
    }

    /// Stops the sources and steps until nothing is in flight. Returns the
    /// number of cycles it took.
    pub fn drain(&mut self, watchdog: u64) -> Result<u64, Timeout> {
        self.stop_sources();
        self.drain_time(watchdog)
    }

    /// Steps until nothing is in flight, without stopping sources.
    pub fn drain_time(&mut self, watchdog: u64) -> Result<u64, Timeout> {
        let start = self.cycle;
        while self.busy() {
            if self.cycle - start >= watchdog {
                return Err(Timeout {
                    cycle: self.cycle,
                    waited: self.cycle - start,
                    dump: self.dump(),
                });
            }
            self.step();
        }
        Ok(self.cycle - start)
    }

    /// Busy components and outstanding transactions per monitored link.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.comps.iter().enumerate() {
            if c.busy() {
                out.push_str(&format!("busy {} ({}): {}\n", self.names[i], c.kind(), c.describe()));
            }
        }
        for (l, m) in &self.monitors {
            let d = m.scoreboard().dump();
            if !d.is_empty() {
                let items: Vec<String> = d.iter().map(|(dir, id, tag)| format!("{dir}:{id:#x}:{tag:#x}")).collect();
                out.push_str(&format!("outstanding on {}: {}\n", self.link_names[*l], items.join(" ")));
            }
        }
        out
    }
}
