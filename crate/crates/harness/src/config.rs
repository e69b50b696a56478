//! Topology and traffic description, read from TOML.

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(default)]
    pub meta: Meta,
    #[serde(default, rename = "component")]
    pub components: Vec<ComponentConfig>,
    #[serde(default, rename = "link")]
    pub links: Vec<LinkConfig>,
    #[serde(default, rename = "traffic")]
    pub traffic: Vec<TrafficConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    #[serde(default)]
    pub name: String,
    /// Only used to convert cycles into seconds in reports.
    #[serde(default = "one")]
    pub clock_ghz: f64,
    /// Cycles allowed for the drain at the end of a run.
    #[serde(default = "default_watchdog")]
    pub watchdog: u64,
    /// Default for links without an explicit `monitor` flag.
    #[serde(default = "yes")]
    pub monitor: bool,
}

impl Default for Meta {
    fn default() -> Self {
        Self {
            name: String::new(),
            clock_ghz: 1.0,
            watchdog: default_watchdog(),
            monitor: true,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_watchdog() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ComponentConfig {
    Generator(GeneratorConfig),
    Crossbar(XbarParams),
    Crosspoint(XbarParams),
    Mux(MuxParams),
    Cut(CutParams),
    Remapper(RemapParams),
    Serializer(SerializerParams),
    Upsizer(UpsizerParams),
    Downsizer(DownsizerParams),
    Dma(DmaParams),
    Memory(MemoryParams),
    Llc(LlcParams),
}

impl ComponentConfig {
    pub fn name(&self) -> &str {
        match self {
            Self::Generator(c) => &c.name,
            Self::Crossbar(c) | Self::Crosspoint(c) => &c.name,
            Self::Mux(c) => &c.name,
            Self::Cut(c) => &c.name,
            Self::Remapper(c) => &c.name,
            Self::Serializer(c) => &c.name,
            Self::Upsizer(c) => &c.name,
            Self::Downsizer(c) => &c.name,
            Self::Dma(c) => &c.name,
            Self::Memory(c) => &c.name,
            Self::Llc(c) => &c.name,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Self::Generator(_) => "generator",
            Self::Crossbar(_) => "crossbar",
            Self::Crosspoint(_) => "crosspoint",
            Self::Mux(_) => "mux",
            Self::Cut(_) => "cut",
            Self::Remapper(_) => "remapper",
            Self::Serializer(_) => "serializer",
            Self::Upsizer(_) => "upsizer",
            Self::Downsizer(_) => "downsizer",
            Self::Dma(_) => "dma",
            Self::Memory(_) => "memory",
            Self::Llc(_) => "llc",
        }
    }
}

/// Traffic master driven by a `[[traffic]]` entry, idle without one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub name: String,
    pub data_bytes: usize,
    pub id_bits: u8,
    #[serde(default = "eight")]
    pub max_outstanding: usize,
    #[serde(default = "eight")]
    pub max_per_id: usize,
    #[serde(default = "one")]
    pub ready_prob: f64,
    #[serde(default)]
    pub random_strobes: bool,
}

fn eight() -> usize {
    8
}

/// Crossbar or crosspoint. A crosspoint adds ID remappers behind every
/// master port so both sides keep `id_bits`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XbarParams {
    pub name: String,
    pub slaves: usize,
    pub masters: usize,
    pub data_bytes: usize,
    pub id_bits: u8,
    /// Address rules `[start, end, master port]`, end exclusive.
    pub map: Vec<[u64; 3]>,
    /// Master port for unmatched addresses; the error slave if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_port: Option<usize>,
    /// Slave ports that never use `default_port`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub error_fallback: Vec<usize>,
    /// Registered channels on every internal connection, aw w b ar r.
    #[serde(default)]
    pub pipeline: [bool; 5],
    /// Removed `[slave, master]` connections.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disconnect: Vec<[usize; 2]>,
    #[serde(default = "eight")]
    pub max_per_id: usize,
    /// Crosspoint only: `[unique IDs, per ID, total]` for every master
    /// port, or a single entry for all.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub budget: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuxParams {
    pub name: String,
    pub slaves: usize,
    pub data_bytes: usize,
    pub id_bits: u8,
    #[serde(default)]
    pub pipeline: [bool; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutParams {
    pub name: String,
    pub data_bytes: usize,
    pub id_bits: u8,
    #[serde(default = "all_channels")]
    pub flags: [bool; 5],
    /// Cuts chained back to back.
    #[serde(default = "one_usize")]
    pub stages: usize,
}

fn all_channels() -> [bool; 5] {
    [true; 5]
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemapParams {
    pub name: String,
    pub data_bytes: usize,
    pub in_bits: u8,
    pub out_bits: u8,
    pub unique: usize,
    pub per_id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_total: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SerializerParams {
    pub name: String,
    pub data_bytes: usize,
    pub in_bits: u8,
    pub out_bits: u8,
    #[serde(default = "eight")]
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpsizerParams {
    pub name: String,
    pub narrow_bytes: usize,
    pub wide_bytes: usize,
    pub id_bits: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub read_slots: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DownsizerParams {
    pub name: String,
    pub wide_bytes: usize,
    pub narrow_bytes: usize,
    pub id_bits: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmaParams {
    pub name: String,
    pub data_bytes: usize,
    pub id_bits: u8,
    #[serde(default = "eight")]
    pub max_outstanding: usize,
    #[serde(default = "max_beats")]
    pub max_beats: usize,
    #[serde(default = "buffer_beats")]
    pub buffer_beats: usize,
}

fn max_beats() -> usize {
    256
}

fn buffer_beats() -> usize {
    64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemKind {
    Simplex,
    Duplex,
    /// Random per-transaction latency, responses reordered across IDs.
    Latency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryParams {
    pub name: String,
    pub kind: MemKind,
    pub data_bytes: usize,
    pub id_bits: u8,
    pub base: u64,
    pub size: u64,
    #[serde(default = "two")]
    pub banks: usize,
    #[serde(default)]
    pub extra_latency: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmd_depth: Option<usize>,
    /// Defaults to enough buffering for one beat per cycle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resp_depth: Option<usize>,
    /// Latency memory only: inclusive `[min, max]` cycles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<[u64; 2]>,
    #[serde(default = "sixteen")]
    pub max_outstanding: usize,
    /// Seed of the initial byte pattern; zero-filled if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_pattern: Option<u64>,
}

fn two() -> usize {
    2
}

fn sixteen() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlcParams {
    pub name: String,
    pub ways: usize,
    pub lines: usize,
    pub blocks_per_line: usize,
    pub block_bytes: usize,
    pub id_bits: u8,
    pub spm_base: u64,
    #[serde(default)]
    pub spm_mask: u64,
    #[serde(default = "one_u64")]
    pub seed: u64,
}

fn one_u64() -> u64 {
    1
}

/// A link from a master port to a slave port. Ports are written
/// `name.mN` / `name.sN`; a bare name means port 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitor: Option<bool>,
    /// `[unique IDs, per ID, total]` checked by the monitor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<[usize; 3]>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub trace: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirMix {
    Read,
    Write,
    #[default]
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrafficConfig {
    Random(RandomTraffic),
    Sequential(SequentialTraffic),
    Permutation(PermutationTraffic),
    DmaTransfers(DmaTraffic),
    TraceReplay(TraceTraffic),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomTraffic {
    pub generators: Vec<String>,
    /// Address ranges `[start, end)`.
    pub ranges: Vec<[u64; 2]>,
    #[serde(default = "half")]
    pub read_fraction: f64,
    /// Inclusive beats per burst.
    #[serde(default = "default_beats")]
    pub beats: [usize; 2],
    #[serde(default = "yes")]
    pub narrow: bool,
    #[serde(default = "yes")]
    pub unaligned: bool,
    /// Distinct IDs drawn; all IDs of the generator if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<u32>,
    #[serde(default = "one")]
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<u64>,
    /// Fraction of non-modifiable requests.
    #[serde(default)]
    pub fixed_fraction: f64,
    /// Give every generator its own slice of every range, which keeps the
    /// golden-memory check exact.
    #[serde(default = "yes")]
    pub partition: bool,
}

fn half() -> f64 {
    0.5
}

fn default_beats() -> [usize; 2] {
    [1, 16]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequentialTraffic {
    pub generators: Vec<String>,
    /// Walked in full-width bursts, one slice per generator.
    pub range: [u64; 2],
    #[serde(default = "sixteen")]
    pub beats: usize,
    #[serde(default)]
    pub dir: DirMix,
    #[serde(default = "one_u32")]
    pub ids: u32,
    #[serde(default = "one")]
    pub rate: f64,
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermutationTraffic {
    pub generators: Vec<String>,
    /// One address region per destination.
    pub targets: Vec<[u64; 2]>,
    /// Generator `i` targets region `(i + shift) % targets`.
    #[serde(default = "one_usize")]
    pub shift: usize,
    #[serde(default = "sixteen")]
    pub beats: usize,
    #[serde(default)]
    pub dir: DirMix,
    #[serde(default = "one_u32")]
    pub ids: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmaTraffic {
    pub dmas: Vec<String>,
    /// Random copies per engine.
    pub count: usize,
    pub src: Vec<[u64; 2]>,
    /// Destinations, split into one slice per engine.
    pub dst: Vec<[u64; 2]>,
    /// Inclusive transfer length in bytes.
    pub len: [u64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceTraffic {
    pub dma: String,
    /// CSV with `cycle_offset,op,src,dst,len,dep_id`, relative to the
    /// config file.
    pub file: String,
}

impl TopologyConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("topology serializes")
    }

    pub fn component(&self, name: &str) -> Option<&ComponentConfig> {
        self.components.iter().find(|c| c.name() == name)
    }

    pub fn component_mut(&mut self, name: &str) -> Option<&mut ComponentConfig> {
        self.components.iter_mut().find(|c| c.name() == name)
    }
}
