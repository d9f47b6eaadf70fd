use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{rng, word_offset};
use crate::error::ConfigError;
use crate::types::{CoreId, MemoryRef};

pub const SERVER_CORE: CoreId = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ServerParams {
    /// Size of the public section readable by every client.
    pub public_bytes: u64,
    /// Size of each client's private slice.
    pub slice_bytes: u64,
}

impl Default for ServerParams {
    fn default() -> Self {
        ServerParams {
            public_bytes: 256 * 1024,
            slice_bytes: 64 * 1024,
        }
    }
}

impl ServerParams {
    pub(crate) fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [("public section", self.public_bytes), ("private slice", self.slice_bytes)] {
            if v < 64 || !v.is_multiple_of(64) {
                return Err(ConfigError::Workload(format!(
                    "{name} must be a positive multiple of 64 bytes"
                )));
            }
        }
        Ok(())
    }

    /// Start of client `core`'s private slice (clients are cores 1..n).
    pub fn slice_base(&self, core: CoreId) -> u64 {
        debug_assert!(core != SERVER_CORE);
        self.public_bytes + (core as u64 - 1) * self.slice_bytes
    }

    pub(crate) fn address_bound(&self, num_cores: usize) -> u64 {
        self.public_bytes + (num_cores as u64 - 1) * self.slice_bytes
    }
}

/// Core 0 serves; every other core is a client.
///
/// Each step picks a core uniformly. The server stores to a uniform address
/// anywhere in the public section or any client slice. A client loads from
/// the public section or from its own slice with equal probability.
pub struct ServerGenerator {
    params: ServerParams,
    num_cores: usize,
    remaining: u64,
    rng: ChaCha8Rng,
}

impl ServerGenerator {
    pub fn new(params: ServerParams, num_cores: usize, num_refs: u64, seed: u64) -> Self {
        ServerGenerator {
            params,
            num_cores,
            remaining: num_refs,
            rng: rng(seed),
        }
    }
}

impl Iterator for ServerGenerator {
    type Item = MemoryRef;

    fn next(&mut self) -> Option<MemoryRef> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let p = self.params;
        let core = self.rng.gen_range(0..self.num_cores);
        Some(if core == SERVER_CORE {
            let whole = p.address_bound(self.num_cores);
            MemoryRef::store(core, word_offset(&mut self.rng, whole))
        } else if self.rng.gen_bool(0.5) {
            MemoryRef::load(core, word_offset(&mut self.rng, p.public_bytes))
        } else {
            MemoryRef::load(core, p.slice_base(core) + word_offset(&mut self.rng, p.slice_bytes))
        })
    }
}
