//! Seeded synthetic workloads.
//!
//! Three scenarios are modelled: cores contending for a few shared locks,
//! cores sweeping rows of a shared array while reading each element's
//! neighbours, and a server core writing data that client cores read. All
//! randomness comes from a ChaCha8 stream seeded with the workload seed, so
//! a given `WorkloadSpec` always yields the same trace.

mod arrays;
mod locks;
mod server;

pub use arrays::{ArraysGenerator, ArraysParams};
pub use locks::{LocksGenerator, LocksParams, LOCK_COUNT};
pub use server::{ServerGenerator, ServerParams};

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::ConfigError;
use crate::trace::TraceWriter;
use crate::types::{MemoryRef, MAX_CORES};

/// Identifier of the PRNG stream, recorded in every trace header.
pub const PRNG_ID: &str = "chacha8 (rand_chacha 0.3, seed_from_u64)";

pub const DEFAULT_REFS: u64 = 5_000_000;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform 4-byte-aligned offset in `[0, bytes)`.
pub(crate) fn word_offset(rng: &mut ChaCha8Rng, bytes: u64) -> u64 {
    use rand::Rng;
    rng.gen_range(0..bytes / 4) * 4
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WorkloadKind {
    Locks,
    Arrays,
    PseudoServer,
}

impl WorkloadKind {
    pub const ALL: [WorkloadKind; 3] = [
        WorkloadKind::Locks,
        WorkloadKind::Arrays,
        WorkloadKind::PseudoServer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WorkloadKind::Locks => "locks",
            WorkloadKind::Arrays => "arrays",
            WorkloadKind::PseudoServer => "server",
        }
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WorkloadKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "locks" => Ok(WorkloadKind::Locks),
            "arrays" => Ok(WorkloadKind::Arrays),
            "server" | "pseudo-server" => Ok(WorkloadKind::PseudoServer),
            other => Err(ConfigError::Workload(format!(
                "unknown workload `{other}` (expected locks, arrays or server)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Workload {
    Locks(LocksParams),
    Arrays(ArraysParams),
    PseudoServer(ServerParams),
}

impl Workload {
    pub fn kind(&self) -> WorkloadKind {
        match self {
            Workload::Locks(_) => WorkloadKind::Locks,
            Workload::Arrays(_) => WorkloadKind::Arrays,
            Workload::PseudoServer(_) => WorkloadKind::PseudoServer,
        }
    }

    pub fn default_for(kind: WorkloadKind) -> Self {
        match kind {
            WorkloadKind::Locks => Workload::Locks(LocksParams::default()),
            WorkloadKind::Arrays => Workload::Arrays(ArraysParams::default()),
            WorkloadKind::PseudoServer => Workload::PseudoServer(ServerParams::default()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WorkloadSpec {
    pub workload: Workload,
    pub num_cores: usize,
    pub num_refs: u64,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn new(kind: WorkloadKind, num_cores: usize, num_refs: u64, seed: u64) -> Self {
        WorkloadSpec {
            workload: Workload::default_for(kind),
            num_cores,
            num_refs,
            seed,
        }
    }

    pub fn kind(&self) -> WorkloadKind {
        self.workload.kind()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Workload(msg));
        if !(1..=MAX_CORES).contains(&self.num_cores) {
            return bad(format!("core count must be in 1..={MAX_CORES}, got {}", self.num_cores));
        }
        if self.num_refs == 0 {
            return bad("reference count must be positive".into());
        }
        match self.workload {
            Workload::Locks(p) => p.validate(),
            Workload::Arrays(p) => p.validate(),
            Workload::PseudoServer(p) => {
                if self.num_cores < 2 {
                    return bad("the server workload needs at least 2 cores".into());
                }
                p.validate()
            }
        }
    }

    /// Exclusive upper bound on every generated address.
    pub fn address_bound(&self) -> u64 {
        match self.workload {
            Workload::Locks(p) => p.address_bound(),
            Workload::Arrays(p) => p.address_bound(self.num_cores),
            Workload::PseudoServer(p) => p.address_bound(self.num_cores),
        }
    }

    /// The reference stream. Exactly `num_refs` records.
    pub fn refs(&self) -> Result<Box<dyn Iterator<Item = MemoryRef> + Send>, ConfigError> {
        self.validate()?;
        Ok(match self.workload {
            Workload::Locks(p) => Box::new(LocksGenerator::new(p, self.num_cores, self.num_refs, self.seed)),
            Workload::Arrays(p) => Box::new(ArraysGenerator::new(p, self.num_cores, self.num_refs, self.seed)),
            Workload::PseudoServer(p) => {
                Box::new(ServerGenerator::new(p, self.num_cores, self.num_refs, self.seed))
            }
        })
    }

    /// Comment lines recording every parameter, without `# ` prefixes.
    pub fn header(&self) -> String {
        let params = match self.workload {
            Workload::Locks(p) => format!(
                "locks={LOCK_COUNT} lock_probability=0.10 private_bytes={} lock_stride={} private_store_fraction=1/3",
                p.private_bytes, p.lock_stride
            ),
            Workload::Arrays(p) => format!("row_length={} element_bytes=4", p.row_length),
            Workload::PseudoServer(p) => format!(
                "public_bytes={} slice_bytes={} client_public_fraction=0.5",
                p.public_bytes, p.slice_bytes
            ),
        };
        format!(
            "moesi-sim trace\nworkload={} cores={} refs={} seed={}\n{params}\nprng={PRNG_ID}",
            self.kind(),
            self.num_cores,
            self.num_refs,
            self.seed
        )
    }

    /// Writes the header and all records. Returns the record count.
    pub fn write_trace<W: Write>(&self, out: W) -> io::Result<u64> {
        let refs = self
            .refs()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        let mut w = TraceWriter::new(out);
        w.comment(&self.header())?;
        let mut n = 0;
        for r in refs {
            w.record(&r)?;
            n += 1;
        }
        w.finish()?.flush()?;
        Ok(n)
    }
}

/// Small FIFO for the records of one generator step.
#[derive(Default)]
pub(crate) struct Pending {
    buf: [Option<MemoryRef>; 6],
    head: usize,
    len: usize,
}

impl Pending {
    pub(crate) fn push(&mut self, r: MemoryRef) {
        self.buf[(self.head + self.len) % 6] = Some(r);
        self.len += 1;
    }

    pub(crate) fn pop(&mut self) -> Option<MemoryRef> {
        if self.len == 0 {
            return None;
        }
        let r = self.buf[self.head].take();
        self.head = (self.head + 1) % 6;
        self.len -= 1;
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(WorkloadSpec::new(WorkloadKind::Locks, 17, 10, 0).validate().is_err());
        assert!(WorkloadSpec::new(WorkloadKind::Locks, 0, 10, 0).validate().is_err());
        assert!(WorkloadSpec::new(WorkloadKind::Arrays, 4, 0, 0).validate().is_err());
        assert!(WorkloadSpec::new(WorkloadKind::PseudoServer, 1, 10, 0).validate().is_err());
        assert!(WorkloadSpec::new(WorkloadKind::PseudoServer, 2, 10, 0).validate().is_ok());
        let mut s = WorkloadSpec::new(WorkloadKind::Arrays, 2, 10, 0);
        s.workload = Workload::Arrays(ArraysParams { row_length: 0 });
        assert!(s.validate().is_err());
    }

    #[test]
    fn every_workload_is_deterministic_and_exact() {
        for kind in WorkloadKind::ALL {
            for cores in [2, 5, 16] {
                for refs in [1, 7, 1000] {
                    let spec = WorkloadSpec::new(kind, cores, refs, 99);
                    let a: Vec<_> = spec.refs().unwrap().collect();
                    let b: Vec<_> = spec.refs().unwrap().collect();
                    assert_eq!(a, b);
                    assert_eq!(a.len() as u64, refs, "{kind} {cores}");
                    assert!(a.iter().all(|r| r.core < cores && r.addr < spec.address_bound()));
                }
            }
        }
    }

    #[test]
    fn seeds_matter() {
        let a: Vec<_> = WorkloadSpec::new(WorkloadKind::Locks, 4, 100, 1).refs().unwrap().collect();
        let b: Vec<_> = WorkloadSpec::new(WorkloadKind::Locks, 4, 100, 2).refs().unwrap().collect();
        assert_ne!(a, b);
    }

    #[test]
    fn trace_file_has_header_and_records() {
        let spec = WorkloadSpec::new(WorkloadKind::PseudoServer, 4, 50, 3);
        let mut out = Vec::new();
        assert_eq!(spec.write_trace(&mut out).unwrap(), 50);
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("# moesi-sim trace\n# workload=server cores=4 refs=50 seed=3\n"));
        assert!(text.contains(PRNG_ID));
        let records = crate::trace::TraceReader::new(text.as_bytes())
            .map(|r| r.unwrap().1)
            .collect::<Vec<_>>();
        assert_eq!(records, spec.refs().unwrap().collect::<Vec<_>>());
    }

    #[test]
    fn pending_fifo() {
        let mut p = Pending::default();
        for round in 0..3u64 {
            for i in 0..6 {
                p.push(MemoryRef::load(0, round * 10 + i));
            }
            for i in 0..6 {
                assert_eq!(p.pop().unwrap().addr, round * 10 + i);
            }
            assert!(p.pop().is_none());
        }
    }
}
