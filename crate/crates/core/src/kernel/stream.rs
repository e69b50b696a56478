use std::collections::VecDeque;

/// Bounded FIFO with registered handshakes: `ready` reflects free space at
/// the start of the cycle and `valid` reflects occupancy, so neither side
/// sees a combinational path through it.
#[derive(Debug, Clone)]
pub struct StreamFifo<T> {
    capacity: usize,
    entries: VecDeque<T>,
}

impl<T> StreamFifo<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "FIFO capacity must be at least 1");
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn space(&self) -> usize {
        self.capacity - self.entries.len()
    }

    /// Ready signal toward the producer.
    pub fn ready(&self) -> bool {
        !self.is_full()
    }

    pub fn peek(&self) -> Option<&T> {
        self.entries.front()
    }

    pub fn peek_mut(&mut self) -> Option<&mut T> {
        self.entries.front_mut()
    }

    pub fn back(&self) -> Option<&T> {
        self.entries.back()
    }

    pub fn back_mut(&mut self) -> Option<&mut T> {
        self.entries.back_mut()
    }

    /// Pushes an entry; refused (returned) when full.
    pub fn push(&mut self, v: T) -> Result<(), T> {
        if self.is_full() {
            Err(v)
        } else {
            self.entries.push_back(v);
            Ok(())
        }
    }

    pub fn pop(&mut self) -> Option<T> {
        self.entries.pop_front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.entries.iter_mut()
    }

    pub fn get(&self, i: usize) -> Option<&T> {
        self.entries.get(i)
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Stream register that cuts valid, ready, and payload paths.
///
/// The input side is ready whenever the skid slot is empty, which only
/// depends on registered state. When the output stalls, one more beat can
/// still be caught in the skid slot, so full throughput is kept with a
/// single cycle of latency.
#[derive(Debug, Clone)]
pub struct SpillReg<T> {
    out: Option<T>,
    skid: Option<T>,
}

impl<T> Default for SpillReg<T> {
    fn default() -> Self {
        Self { out: None, skid: None }
    }
}

impl<T> SpillReg<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Output payload; valid iff `Some`.
    pub fn out(&self) -> Option<&T> {
        self.out.as_ref()
    }

    /// Input ready.
    pub fn ready(&self) -> bool {
        self.skid.is_none()
    }

    pub fn len(&self) -> usize {
        self.out.is_some() as usize + self.skid.is_some() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_none()
    }

    /// Clock edge. `input` is the beat accepted this cycle (valid and
    /// ready), `out_fired` whether the output handshake happened.
    pub fn commit(&mut self, input: Option<T>, out_fired: bool) {
        if out_fired {
            debug_assert!(self.out.is_some());
            self.out = self.skid.take();
        }
        if let Some(v) = input {
            debug_assert!(self.skid.is_none(), "spill register overrun");
            if self.out.is_none() {
                self.out = Some(v);
            } else {
                self.skid = Some(v);
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.out.iter().chain(self.skid.iter())
    }
}

/// Round-robin arbiter over up to 64 inputs.
///
/// A grant that did not complete its handshake is locked, so the selection
/// stays stable until the transfer happens.
#[derive(Debug, Clone)]
pub struct RrArbiter {
    n: usize,
    pointer: usize,
    lock: Option<usize>,
}

impl RrArbiter {
    pub fn new(n: usize) -> Self {
        assert!((1..=64).contains(&n), "arbiter supports 1..=64 inputs");
        Self {
            n,
            pointer: n - 1,
            lock: None,
        }
    }

    pub fn with_pointer(n: usize, pointer: usize) -> Self {
        let mut a = Self::new(n);
        a.pointer = pointer % n;
        a
    }

    pub fn inputs(&self) -> usize {
        self.n
    }

    pub fn pointer(&self) -> usize {
        self.pointer
    }

    pub fn locked(&self) -> Option<usize> {
        self.lock
    }

    /// Grant for the request bitset: the locked input while a lock is held,
    /// otherwise the first requester strictly after the pointer.
    pub fn grant(&self, requests: u64) -> Option<usize> {
        if let Some(l) = self.lock {
            return (requests >> l & 1 == 1).then_some(l);
        }
        if requests == 0 {
            return None;
        }
        let start = (self.pointer + 1) % self.n;
        let mask = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        let req = requests & mask;
        // Rotate so that `start` becomes bit 0.
        let rotated = if start == 0 {
            req
        } else {
            (req >> start) | (req << (self.n - start)) & mask
        };
        if rotated == 0 {
            return None;
        }
        Some((start + rotated.trailing_zeros() as usize) % self.n)
    }

    /// Clock edge after a grant. `released` is true when the granted
    /// transfer finished (for bursts: on the last beat); otherwise the
    /// grant is held.
    pub fn update(&mut self, granted: Option<usize>, released: bool) {
        let Some(g) = granted else { return };
        if released {
            self.pointer = g;
            self.lock = None;
        } else {
            self.lock = Some(g);
        }
    }
}
