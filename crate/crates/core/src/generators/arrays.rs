use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{rng, Pending};
use crate::error::ConfigError;
use crate::types::{CoreId, MemoryRef};

const ELEMENT_BYTES: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ArraysParams {
    pub row_length: u64,
}

impl Default for ArraysParams {
    fn default() -> Self {
        ArraysParams { row_length: 1024 }
    }
}

impl ArraysParams {
    pub(crate) fn validate(&self) -> Result<(), ConfigError> {
        if self.row_length == 0 {
            return Err(ConfigError::Workload("row length must be at least 1".into()));
        }
        Ok(())
    }

    /// Address of element `(row, col)` in the row-major array.
    pub fn element_addr(&self, row: usize, col: u64) -> u64 {
        (row as u64 * self.row_length + col) * ELEMENT_BYTES
    }

    pub(crate) fn address_bound(&self, num_cores: usize) -> u64 {
        self.element_addr(num_cores, 0)
    }
}

/// A `num_cores × row_length` array where core `i` walks row `i`.
///
/// Each cycle a uniformly chosen core processes its next element: it loads
/// the element and its in-bounds neighbours (above, below, left, right),
/// then stores the element and advances one column, wrapping at the row end.
pub struct ArraysGenerator {
    params: ArraysParams,
    num_cores: usize,
    remaining: u64,
    rng: ChaCha8Rng,
    cursor: Vec<u64>,
    pending: Pending,
}

impl ArraysGenerator {
    pub fn new(params: ArraysParams, num_cores: usize, num_refs: u64, seed: u64) -> Self {
        ArraysGenerator {
            params,
            num_cores,
            remaining: num_refs,
            rng: rng(seed),
            cursor: vec![0; num_cores],
            pending: Pending::default(),
        }
    }

    fn process(&mut self, core: CoreId) {
        let p = self.params;
        let col = self.cursor[core];
        let here = p.element_addr(core, col);
        self.pending.push(MemoryRef::load(core, here));
        if core > 0 {
            self.pending.push(MemoryRef::load(core, p.element_addr(core - 1, col)));
        }
        if core + 1 < self.num_cores {
            self.pending.push(MemoryRef::load(core, p.element_addr(core + 1, col)));
        }
        if col > 0 {
            self.pending.push(MemoryRef::load(core, p.element_addr(core, col - 1)));
        }
        if col + 1 < p.row_length {
            self.pending.push(MemoryRef::load(core, p.element_addr(core, col + 1)));
        }
        self.pending.push(MemoryRef::store(core, here));
        self.cursor[core] = (col + 1) % p.row_length;
    }
}

impl Iterator for ArraysGenerator {
    type Item = MemoryRef;

    fn next(&mut self) -> Option<MemoryRef> {
        if self.remaining == 0 {
            return None;
        }
        let r = loop {
            if let Some(r) = self.pending.pop() {
                break r;
            }
            let core = self.rng.gen_range(0..self.num_cores);
            self.process(core);
        };
        self.remaining -= 1;
        Some(r)
    }
}
