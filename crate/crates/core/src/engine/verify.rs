//! Coherence invariant checking and data-version tracking.

use std::collections::HashMap;
use std::fmt;

use crate::types::{CoherenceState, CoreId};

/// Tracks, per block, the stamp of the latest store and the stamp currently
/// held by main memory. Stamp 0 is the initial contents.
#[derive(Clone, Debug, Default)]
pub(crate) struct VersionTracker {
    latest: HashMap<u64, u64>,
    memory: HashMap<u64, u64>,
    next: u64,
}

impl VersionTracker {
    pub(crate) fn latest(&self, block: u64) -> u64 {
        self.latest.get(&block).copied().unwrap_or(0)
    }

    pub(crate) fn memory(&self, block: u64) -> u64 {
        self.memory.get(&block).copied().unwrap_or(0)
    }

    /// Allocates the stamp for a new store to `block`.
    pub(crate) fn bump(&mut self, block: u64) -> u64 {
        self.next += 1;
        self.latest.insert(block, self.next);
        self.next
    }

    pub(crate) fn write_back(&mut self, block: u64, version: u64) {
        self.memory.insert(block, version);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// More than one cache holds the block in M or O.
    MultipleOwners,
    /// A cache holds the block in M or E while another holds a valid copy.
    ExclusiveNotAlone,
    /// The sharer directory disagrees with the caches.
    DirectoryMismatch {
        directory: Vec<CoreId>,
        caches: Vec<CoreId>,
    },
    /// A valid copy does not carry the latest store.
    StaleCopy { core: CoreId, version: u64, latest: u64 },
    /// No cache owns the block yet memory does not hold the latest store.
    StaleMemory { memory: u64, latest: u64 },
    /// A load observed data older than the latest store.
    StaleRead { core: CoreId, observed: u64, latest: u64 },
    /// A fill fetched data older than the latest store.
    StaleFetch { core: CoreId, fetched: u64, latest: u64 },
    /// A threshold counter exceeded its ceiling.
    CounterOverflow { core: CoreId, counter: u8, ceiling: u8 },
    /// Two resident lines in one set share an LRU rank.
    RecencyCollision { core: CoreId, set: usize },
}

/// Structured report of a broken invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub block: u64,
    pub kind: ViolationKind,
    /// Every cache holding the block (any state, including resident `I`).
    pub holders: Vec<(CoreId, CoherenceState)>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "block {:#x}: ", self.block)?;
        match &self.kind {
            ViolationKind::MultipleOwners => write!(f, "multiple M/O owners")?,
            ViolationKind::ExclusiveNotAlone => {
                write!(f, "M/E copy coexists with another valid copy")?
            }
            ViolationKind::DirectoryMismatch { directory, caches } => write!(
                f,
                "directory lists cores {directory:?} but caches hold valid copies in {caches:?}"
            )?,
            ViolationKind::StaleCopy { core, version, latest } => write!(
                f,
                "core {core} holds valid version {version}, latest is {latest}"
            )?,
            ViolationKind::StaleMemory { memory, latest } => write!(
                f,
                "no owner and memory holds version {memory}, latest is {latest}"
            )?,
            ViolationKind::StaleRead { core, observed, latest } => write!(
                f,
                "core {core} read version {observed}, latest is {latest}"
            )?,
            ViolationKind::StaleFetch { core, fetched, latest } => write!(
                f,
                "core {core} fetched version {fetched}, latest is {latest}"
            )?,
            ViolationKind::CounterOverflow { core, counter, ceiling } => write!(
                f,
                "core {core} counter {counter} above ceiling {ceiling}"
            )?,
            ViolationKind::RecencyCollision { core, set } => {
                write!(f, "core {core} set {set} has duplicate LRU ranks")?
            }
        }
        if !self.holders.is_empty() {
            f.write_str(" (holders:")?;
            for (core, state) in &self.holders {
                write!(f, " core {core}={state}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl std::error::Error for Violation {}
