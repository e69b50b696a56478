//! Protocol data model: commands, beats, IDs, burst address arithmetic, and
//! the link monitors that check handshake and ordering rules.

mod monitor;

use std::fmt;
use std::ops::Range;

use bytes::Bytes;

use crate::ConfigError;

pub use monitor::{
    check_handshakes, check_ordering, Budget, ChannelTrace, ConcurrencyStats, LinkEvent,
    LinkMonitor, LinkStats, LinkTrace, OrderingScoreboard, Rule, Sample, StabilityChecker,
    Violation,
};

/// Maximum number of beats in one burst.
pub const MAX_BURST_BEATS: usize = 256;
/// No burst may cross an address boundary of this many bytes.
pub const BOUNDARY_BYTES: u64 = 4096;
/// Widest supported data bus, in bytes (1024 bit).
pub const MAX_DATA_BYTES: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dir {
    Read,
    Write,
}

impl Dir {
    pub const BOTH: [Dir; 2] = [Dir::Read, Dir::Write];

    pub fn index(self) -> usize {
        match self {
            Dir::Read => 0,
            Dir::Write => 1,
        }
    }
}

impl fmt::Display for Dir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dir::Read => f.write_str("read"),
            Dir::Write => f.write_str("write"),
        }
    }
}

/// A transaction ID together with the number of bits it occupies on the
/// link it was issued on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct TransactionId {
    value: u32,
    width: u8,
}

impl TransactionId {
    pub fn new(value: u32, width: u8) -> Result<Self, ConfigError> {
        if width > 32 {
            return Err(ConfigError::invalid(format!("ID width {width} exceeds 32 bits")));
        }
        if width < 32 && (value as u64) >= (1u64 << width) {
            return Err(ConfigError::invalid(format!(
                "ID value {value:#x} does not fit in {width} bits"
            )));
        }
        Ok(Self { value, width })
    }

    /// Builds an ID, masking `value` to `width` bits.
    pub fn masked(value: u32, width: u8) -> Self {
        let width = width.min(32);
        Self {
            value: value & mask32(width),
            width,
        }
    }

    pub fn value(self) -> u32 {
        self.value
    }

    pub fn width(self) -> u8 {
        self.width
    }

    /// Places `prefix` in `prefix_bits` new most-significant bits above an ID
    /// that is `low_bits` wide.
    pub fn prepend(self, prefix: u32, prefix_bits: u8, low_bits: u8) -> Self {
        let width = low_bits + prefix_bits;
        debug_assert!(width <= 32);
        let value = if prefix_bits == 0 {
            self.value
        } else {
            (prefix << low_bits) | (self.value & mask32(low_bits))
        };
        Self::masked(value, width)
    }

    /// Inverse of [`prepend`](Self::prepend): returns the prefix and the low ID.
    pub fn split(self, low_bits: u8) -> (u32, TransactionId) {
        let low = Self::masked(self.value, low_bits);
        let high = if low_bits >= 32 { 0 } else { self.value >> low_bits };
        (high, low)
    }
}

impl fmt::Display for TransactionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}/{}b", self.value, self.width)
    }
}

pub(crate) fn mask32(bits: u8) -> u32 {
    if bits >= 32 {
        u32::MAX
    } else {
        (1u32 << bits) - 1
    }
}

/// Bits needed to index `n` distinct ports.
pub fn index_bits(n: usize) -> u8 {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Attrs {
    /// Whether interconnect components may reshape the burst.
    pub modifiable: bool,
    /// Priority hint, 0..=15.
    pub qos: u8,
}

/// One beat on a read or write command channel.
///
/// `tag` is simulator bookkeeping: it identifies the originating transaction
/// so that monitors can tell apart transactions that share an ID. Hardware
/// has no such field; components copy it from commands to the beats they
/// produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Command {
    pub addr: u64,
    pub id: TransactionId,
    /// Beat count minus one.
    pub len: u8,
    /// Bytes per beat, a power of two.
    pub size: u64,
    pub dir: Dir,
    pub attrs: Attrs,
    pub tag: u64,
}

impl Command {
    pub fn new(dir: Dir, addr: u64, len: u8, size: u64, id: TransactionId) -> Self {
        Self {
            addr,
            id,
            len,
            size,
            dir,
            attrs: Attrs {
                modifiable: true,
                qos: 0,
            },
            tag: 0,
        }
    }

    pub fn with_tag(mut self, tag: u64) -> Self {
        self.tag = tag;
        self
    }

    pub fn with_attrs(mut self, attrs: Attrs) -> Self {
        self.attrs = attrs;
        self
    }

    pub fn beats(&self) -> usize {
        self.len as usize + 1
    }

    /// Start address aligned down to the beat size.
    pub fn aligned_addr(&self) -> u64 {
        self.addr & !(self.size - 1)
    }

    /// First byte address past the burst.
    pub fn end_addr(&self) -> u64 {
        self.aligned_addr() + self.beats() as u64 * self.size
    }

    /// Bytes actually transferred (the first beat may start unaligned).
    pub fn byte_count(&self) -> u64 {
        self.end_addr() - self.addr
    }

    /// Address of beat `k`.
    pub fn beat_addr(&self, k: usize) -> u64 {
        if k == 0 {
            self.addr
        } else {
            self.aligned_addr() + k as u64 * self.size
        }
    }

    /// Checks the command against the invariants of a link with the given
    /// data width.
    pub fn validate(&self, data_bytes: usize) -> Result<(), ConfigError> {
        if !self.size.is_power_of_two() {
            return Err(ConfigError::invalid(format!("beat size {} is not a power of two", self.size)));
        }
        if self.size > data_bytes as u64 {
            return Err(ConfigError::invalid(format!(
                "beat size {} exceeds data width of {} bytes",
                self.size, data_bytes
            )));
        }
        let first = self.addr / BOUNDARY_BYTES;
        let last = (self.end_addr() - 1) / BOUNDARY_BYTES;
        if first != last {
            return Err(ConfigError::invalid(format!(
                "burst at {:#x} with {} beats of {} bytes crosses a {}-byte boundary",
                self.addr,
                self.beats(),
                self.size,
                BOUNDARY_BYTES
            )));
        }
        Ok(())
    }
}

/// Position of one beat of a burst on the data bus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeatSlot {
    pub addr: u64,
    pub lanes: Range<usize>,
}

/// Byte addresses and active byte lanes of each beat of an incrementing burst.
pub fn beats_of(cmd: &Command, data_bytes: usize) -> Result<Vec<BeatSlot>, ConfigError> {
    if !data_bytes.is_power_of_two() || data_bytes > MAX_DATA_BYTES {
        return Err(ConfigError::invalid(format!("unsupported data width {data_bytes} bytes")));
    }
    if !cmd.size.is_power_of_two() || cmd.size > data_bytes as u64 {
        return Err(ConfigError::invalid(format!(
            "beat size {} does not fit a {}-byte data bus",
            cmd.size, data_bytes
        )));
    }
    Ok((0..cmd.beats()).map(|k| beat_slot(cmd, k, data_bytes)).collect())
}

/// Single-beat version of [`beats_of`]; the caller guarantees validity.
pub fn beat_slot(cmd: &Command, k: usize, data_bytes: usize) -> BeatSlot {
    let addr = cmd.beat_addr(k);
    let aligned = addr & !(cmd.size - 1);
    let lo = (addr % data_bytes as u64) as usize;
    let hi = (aligned % data_bytes as u64) as usize + cmd.size as usize;
    BeatSlot { addr, lanes: lo..hi }
}

/// Strobe mask with the bits of `lanes` set.
pub fn lane_mask(lanes: Range<usize>) -> u128 {
    let width = lanes.end - lanes.start;
    if width == 0 {
        0
    } else if width >= 128 {
        u128::MAX
    } else {
        ((1u128 << width) - 1) << lanes.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Resp {
    #[default]
    Okay,
    SlaveError,
    DecodeError,
}

impl Resp {
    /// Combines two responses, keeping the more severe one.
    pub fn merge(self, other: Resp) -> Resp {
        self.max(other)
    }

    pub fn is_error(self) -> bool {
        self != Resp::Okay
    }
}

/// A beat on the write data channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataBeat {
    pub data: Bytes,
    /// One bit per byte lane.
    pub strb: u128,
    pub last: bool,
    pub tag: u64,
}

/// A beat on the read response or write response channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseBeat {
    pub id: TransactionId,
    /// Empty for write responses.
    pub data: Bytes,
    pub resp: Resp,
    pub last: bool,
    pub tag: u64,
}

impl ResponseBeat {
    pub fn write(id: TransactionId, resp: Resp, tag: u64) -> Self {
        Self {
            id,
            data: Bytes::new(),
            resp,
            last: true,
            tag,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmd(addr: u64, len: u8, size: u64) -> Command {
        Command::new(Dir::Read, addr, len, size, TransactionId::default())
    }

    /// Walks every byte of the burst and groups bytes into beats by the
    /// bus word they fall into.
    fn byte_walk(c: &Command, width: usize) -> Vec<(u64, Range<usize>)> {
        let mut out: Vec<(u64, Range<usize>)> = Vec::new();
        let mut beat_start = c.addr;
        for k in 0..c.beats() {
            let beat_end = (c.addr / c.size) * c.size + (k as u64 + 1) * c.size;
            let lo = (beat_start % width as u64) as usize;
            let hi = lo + (beat_end - beat_start) as usize;
            out.push((beat_start, lo..hi));
            beat_start = beat_end;
        }
        out
    }

    #[test]
    fn aligned_full_width_burst() {
        let beats = beats_of(&cmd(0x00, 3, 8), 8).unwrap();
        let addrs: Vec<u64> = beats.iter().map(|b| b.addr).collect();
        assert_eq!(addrs, vec![0x00, 0x08, 0x10, 0x18]);
        assert!(beats.iter().all(|b| b.lanes == (0..8)));
    }

    #[test]
    fn unaligned_first_beat() {
        let beats = beats_of(&cmd(0x0C, 1, 8), 8).unwrap();
        assert_eq!(beats[0], BeatSlot { addr: 0x0C, lanes: 4..8 });
        assert_eq!(beats[1], BeatSlot { addr: 0x10, lanes: 0..8 });
        let walked = byte_walk(&cmd(0x0C, 1, 8), 8);
        assert_eq!(walked, vec![(0x0C, 4..8), (0x10, 0..8)]);
    }

    #[test]
    fn single_byte_beat() {
        let beats = beats_of(&cmd(0x0, 0, 1), 8).unwrap();
        assert_eq!(beats, vec![BeatSlot { addr: 0, lanes: 0..1 }]);
    }

    #[test]
    fn oversized_beat_is_rejected() {
        assert!(beats_of(&cmd(0, 0, 16), 8).is_err());
    }

    #[test]
    fn boundary_crossing_is_invalid() {
        assert!(cmd(0xFF8, 1, 8).validate(8).is_err());
        assert!(cmd(0xFF8, 0, 8).validate(8).is_ok());
        assert!(cmd(0, 255, 16).validate(16).is_ok());
    }

    #[test]
    fn id_prepend_and_split() {
        let id = TransactionId::new(0b101, 3).unwrap();
        let ext = id.prepend(2, 2, 3);
        assert_eq!(ext.value(), 0b10101);
        assert_eq!(ext.width(), 5);
        assert_eq!(ext.split(3), (2, id));
        assert!(TransactionId::new(8, 3).is_err());
    }

    #[test]
    fn index_bits_rounds_up() {
        assert_eq!(index_bits(1), 0);
        assert_eq!(index_bits(2), 1);
        assert_eq!(index_bits(3), 2);
        assert_eq!(index_bits(4), 2);
        assert_eq!(index_bits(5), 3);
    }

    #[test]
    fn resp_merge_keeps_worst() {
        assert_eq!(Resp::Okay.merge(Resp::SlaveError), Resp::SlaveError);
        assert_eq!(Resp::DecodeError.merge(Resp::Okay), Resp::DecodeError);
    }

    proptest::proptest! {
        #[test]
        fn beats_match_byte_walk(addr in 0u64..0x2000, len in 0u8..32, size_log in 0u32..4, width_log in 3u32..6) {
            let size = 1u64 << size_log;
            let width = 1usize << width_log;
            let c = cmd(addr, len, size);
            let beats = beats_of(&c, width).unwrap();
            let walked = byte_walk(&c, width);
            proptest::prop_assert_eq!(beats.len(), c.beats());
            for (b, (a, lanes)) in beats.iter().zip(walked) {
                proptest::prop_assert_eq!(b.addr, a);
                proptest::prop_assert_eq!(b.lanes.clone(), lanes);
            }
        }
    }
}
