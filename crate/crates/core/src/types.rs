//! Shared vocabulary: references, geometry, MOESI states, cache lines and bus
//! transactions.

use std::fmt;

use crate::error::ConfigError;

/// Hard upper bound on simulated caches.
pub const MAX_CORES: usize = 16;

/// Core identifier, 0-based.
pub type CoreId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Load,
    Store,
}

/// One trace record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MemoryRef {
    pub op: Op,
    pub core: CoreId,
    pub addr: u64,
}

impl MemoryRef {
    pub fn load(core: CoreId, addr: u64) -> Self {
        MemoryRef { op: Op::Load, core, addr }
    }

    pub fn store(core: CoreId, addr: u64) -> Self {
        MemoryRef { op: Op::Store, core, addr }
    }
}

/// Where a byte address lands in a cache.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLocation {
    pub set_index: usize,
    pub tag: u64,
    pub block_number: u64,
}

/// Shape of every per-core cache plus the number of cores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CacheGeometry {
    num_sets: usize,
    ways: usize,
    block_size_bytes: u64,
    num_cores: usize,
    set_bits: u32,
    block_bits: u32,
}

impl CacheGeometry {
    pub const DEFAULT_SETS: usize = 64;
    pub const DEFAULT_WAYS: usize = 4;
    pub const DEFAULT_BLOCK_SIZE: u64 = 64;

    pub fn new(
        num_sets: usize,
        ways: usize,
        block_size_bytes: u64,
        num_cores: usize,
    ) -> Result<Self, ConfigError> {
        if num_sets == 0 || !num_sets.is_power_of_two() {
            return Err(ConfigError::Geometry(format!(
                "number of sets must be a positive power of two, got {num_sets}"
            )));
        }
        if ways == 0 || ways > u8::MAX as usize {
            return Err(ConfigError::Geometry(format!(
                "associativity must be in 1..=255, got {ways}"
            )));
        }
        if block_size_bytes == 0 || !block_size_bytes.is_power_of_two() {
            return Err(ConfigError::Geometry(format!(
                "block size must be a positive power of two, got {block_size_bytes}"
            )));
        }
        if !(1..=MAX_CORES).contains(&num_cores) {
            return Err(ConfigError::Geometry(format!(
                "core count must be in 1..={MAX_CORES}, got {num_cores}"
            )));
        }
        Ok(CacheGeometry {
            num_sets,
            ways,
            block_size_bytes,
            num_cores,
            set_bits: num_sets.trailing_zeros(),
            block_bits: block_size_bytes.trailing_zeros(),
        })
    }

    /// 64 sets, 4 ways, 64-byte blocks.
    pub fn with_cores(num_cores: usize) -> Result<Self, ConfigError> {
        Self::new(
            Self::DEFAULT_SETS,
            Self::DEFAULT_WAYS,
            Self::DEFAULT_BLOCK_SIZE,
            num_cores,
        )
    }

    pub fn num_sets(&self) -> usize {
        self.num_sets
    }

    pub fn ways(&self) -> usize {
        self.ways
    }

    pub fn block_size_bytes(&self) -> u64 {
        self.block_size_bytes
    }

    pub fn num_cores(&self) -> usize {
        self.num_cores
    }

    /// Lines per core cache.
    pub fn lines_per_cache(&self) -> usize {
        self.num_sets * self.ways
    }

    pub fn block_number(&self, addr: u64) -> u64 {
        addr >> self.block_bits
    }

    pub fn block_of(&self, addr: u64) -> BlockLocation {
        self.locate_block(self.block_number(addr))
    }

    pub fn locate_block(&self, block_number: u64) -> BlockLocation {
        BlockLocation {
            set_index: (block_number & (self.num_sets as u64 - 1)) as usize,
            tag: block_number >> self.set_bits,
            block_number,
        }
    }

    /// Inverse of [`CacheGeometry::locate_block`].
    pub fn block_from_parts(&self, tag: u64, set_index: usize) -> u64 {
        (tag << self.set_bits) | set_index as u64
    }
}

/// MOESI line state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CoherenceState {
    M,
    O,
    E,
    S,
    I,
}

impl CoherenceState {
    pub fn is_valid(self) -> bool {
        self != CoherenceState::I
    }

    /// Responsible for supplying data and writing it back.
    pub fn is_owner(self) -> bool {
        matches!(self, CoherenceState::M | CoherenceState::O)
    }

    pub fn is_dirty(self) -> bool {
        self.is_owner()
    }

    pub fn is_exclusive(self) -> bool {
        matches!(self, CoherenceState::M | CoherenceState::E)
    }
}

impl fmt::Display for CoherenceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            CoherenceState::M => "M",
            CoherenceState::O => "O",
            CoherenceState::E => "E",
            CoherenceState::S => "S",
            CoherenceState::I => "I",
        };
        f.write_str(c)
    }
}

/// A resident cache line. Lines stay resident in `I` after an invalidation
/// until their way is reclaimed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CacheLine {
    pub tag: u64,
    pub state: CoherenceState,
    /// Threshold-scheme counter, saturating in `[0, counter_ceiling]`.
    pub counter: u8,
    /// LRU rank within the set; 0 is most recently used.
    pub recency: u8,
    /// Stamp of the last store reflected in this copy (verification only).
    pub version: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TxnKind {
    ReadReq,
    InvalidateReq,
    UpdateReq,
}

impl fmt::Display for TxnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TxnKind::ReadReq => "ReadReq",
            TxnKind::InvalidateReq => "InvalidateReq",
            TxnKind::UpdateReq => "UpdateReq",
        })
    }
}

/// A counted interconnect event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BusTransaction {
    pub kind: TxnKind,
    pub issuer: CoreId,
    pub block: u64,
}
