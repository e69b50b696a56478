//! Request sources for generators and job lists for DMA engines.

use std::path::Path;

use burstsim::dma::{Job, JobKind, Transfer1D};
use burstsim::initiator::{RandomSource, Request, TrafficSource};
use burstsim::protocol::{Dir, BOUNDARY_BYTES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{DirMix, DmaTraffic, RandomTraffic};
use crate::error::HarnessError;

/// Slice `k` of `n` equal slices of `[lo, hi)`, aligned to `align`.
pub fn slice(range: [u64; 2], k: usize, n: usize, align: u64) -> [u64; 2] {
    let step = ((range[1] - range[0]) / n as u64) / align * align;
    let lo = range[0] + k as u64 * step;
    [lo, lo + step]
}

/// Random source for generator `k` of `n`.
pub fn random_source(t: &RandomTraffic, k: usize, n: usize, data_bytes: usize, id_bits: u8) -> RandomSource {
    let ranges = t
        .ranges
        .iter()
        .map(|&r| if t.partition { slice(r, k, n, data_bytes as u64) } else { r })
        .map(|[lo, hi]| (lo, hi))
        .collect();
    let mut s = RandomSource::new(ranges, data_bytes, t.ids.unwrap_or(1 << id_bits.min(16)));
    s.read_fraction = t.read_fraction;
    s.beats = (t.beats[0].max(1), t.beats[1].max(1));
    s.narrow = t.narrow;
    s.unaligned = t.unaligned;
    s.rate = t.rate;
    s.limit = t.limit;
    s.fixed_fraction = t.fixed_fraction;
    s
}

/// Full-width bursts walking a region in address order, wrapping at the
/// end. Drives both sequential and permutation traffic.
#[derive(Debug, Clone)]
pub struct StreamSource {
    range: [u64; 2],
    size: u64,
    beats: usize,
    dir: DirMix,
    ids: u32,
    rate: f64,
    next: [u64; 2],
    turn: u64,
}

impl StreamSource {
    pub fn new(range: [u64; 2], data_bytes: usize, beats: usize, dir: DirMix, ids: u32, rate: f64) -> Self {
        Self {
            range,
            size: data_bytes as u64,
            beats: beats.clamp(1, 256),
            dir,
            ids: ids.max(1),
            rate,
            next: [range[0]; 2],
            turn: 0,
        }
    }
}

impl TrafficSource for StreamSource {
    fn next(&mut self, _cycle: u64, rng: &mut ChaCha8Rng) -> Option<Request> {
        if self.rate < 1.0 && !rng.gen_bool(self.rate) {
            return None;
        }
        if self.range[1] - self.range[0] < self.size {
            return None;
        }
        let dir = match self.dir {
            DirMix::Read => Dir::Read,
            DirMix::Write => Dir::Write,
            DirMix::Mixed if self.turn.is_multiple_of(2) => Dir::Read,
            DirMix::Mixed => Dir::Write,
        };
        let cur = &mut self.next[dir.index()];
        if *cur + self.size > self.range[1] {
            *cur = self.range[0];
        }
        let addr = *cur;
        let page_end = (addr / BOUNDARY_BYTES + 1) * BOUNDARY_BYTES;
        let fit = (page_end.min(self.range[1]) - addr) / self.size;
        let beats = (self.beats as u64).min(fit);
        *cur += beats * self.size;
        let id = (self.turn / 2 % self.ids as u64) as u32;
        self.turn += 1;
        let mut r = Request::read(addr, (beats - 1) as u8, self.size, id);
        r.dir = dir;
        Some(r)
    }

    fn exhausted(&self) -> bool {
        false
    }
}

/// Random copies for engine `k` of `n`; each engine writes only its own
/// slice of the destination ranges.
pub fn dma_jobs(t: &DmaTraffic, k: usize, n: usize, align: u64, seed: u64) -> Vec<Job> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dsts: Vec<[u64; 2]> = t.dst.iter().map(|&r| slice(r, k, n, align)).collect();
    let mut jobs = Vec::with_capacity(t.count);
    for id in 0..t.count as u64 {
        let d = dsts[rng.gen_range(0..dsts.len())];
        let s = t.src[rng.gen_range(0..t.src.len())];
        let max = (d[1] - d[0]).min(s[1] - s[0]);
        let len = rng.gen_range(t.len[0].max(1)..=t.len[1].max(t.len[0]).max(1)).min(max);
        if len == 0 {
            continue;
        }
        jobs.push(Job {
            id,
            kind: JobKind::Copy(Transfer1D {
                src: rng.gen_range(s[0]..=s[1] - len),
                dst: rng.gen_range(d[0]..=d[1] - len),
                len,
            }),
            delay: 0,
            dep: None,
        });
    }
    jobs
}

fn parse_u64(s: &str) -> Option<u64> {
    let s = s.trim();
    match s.strip_prefix("0x") {
        Some(h) => u64::from_str_radix(h, 16).ok(),
        None => s.parse().ok(),
    }
}

/// Parses replay records `cycle_offset,op,src,dst,len,dep_id`. The job ID
/// is the record's position; `dep_id` is empty or names an earlier record.
/// `op` is `copy`, or `compute` with `len` busy cycles.
pub fn parse_trace(text: &str, path: &str) -> Result<Vec<Job>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let want = ["cycle_offset", "op", "src", "dst", "len", "dep_id"];
    let head = rdr.headers()?.clone();
    if head.iter().ne(want.iter().copied()) {
        return Err(HarnessError::config(path, format!("header must be {}", want.join(","))));
    }
    let mut jobs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let at = format!("{path}:{}", i + 2);
        let num = |k: usize| parse_u64(&rec[k]).ok_or_else(|| HarnessError::config(&at, format!("bad {}", want[k])));
        let dep = match rec[5].trim() {
            "" => None,
            s => {
                let d = parse_u64(s).ok_or_else(|| HarnessError::config(&at, "bad dep_id"))?;
                if d >= i as u64 {
                    return Err(HarnessError::config(&at, "dep_id must name an earlier record"));
                }
                Some(d)
            }
        };
        let kind = match &rec[1] {
            "copy" => JobKind::Copy(Transfer1D {
                src: num(2)?,
                dst: num(3)?,
                len: num(4)?,
            }),
            "compute" => JobKind::Compute(num(4)?),
            other => return Err(HarnessError::config(&at, format!("unknown op {other}"))),
        };
        jobs.push(Job {
            id: i as u64,
            kind,
            delay: num(0)?,
            dep,
        });
    }
    Ok(jobs)
}

pub fn load_trace(base: Option<&Path>, file: &str, path: &str) -> Result<Vec<Job>, HarnessError> {
    let p = match base {
        Some(b) => b.join(file),
        None => Path::new(file).to_path_buf(),
    };
    let text = std::fs::read_to_string(&p).map_err(|source| HarnessError::Io {
        path: format!("{path} ({})", p.display()),
        source,
    })?;
    parse_trace(&text, path)
}
