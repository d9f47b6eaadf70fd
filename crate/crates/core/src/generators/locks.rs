use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{rng, word_offset, Pending};
use crate::error::ConfigError;
use crate::types::{CoreId, MemoryRef, MAX_CORES};

pub const LOCK_COUNT: usize = 3;
const LOCK_PROBABILITY: f64 = 0.10;
const PRIVATE_STORE_PROBABILITY: f64 = 1.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LocksParams {
    /// Bytes in each core's private range.
    pub private_bytes: u64,
    /// Distance between lock addresses; one lock per block at the default
    /// 64-byte line size.
    pub lock_stride: u64,
}

impl Default for LocksParams {
    fn default() -> Self {
        LocksParams {
            private_bytes: 64 * 1024,
            lock_stride: 64,
        }
    }
}

impl LocksParams {
    pub(crate) fn validate(&self) -> Result<(), ConfigError> {
        if self.private_bytes < 4 || !self.private_bytes.is_multiple_of(4) {
            return Err(ConfigError::Workload(
                "private range must be a positive multiple of 4 bytes".into(),
            ));
        }
        if self.lock_stride < 4 || !self.lock_stride.is_power_of_two() {
            return Err(ConfigError::Workload(
                "lock stride must be a power of two of at least 4 bytes".into(),
            ));
        }
        Ok(())
    }

    /// Locks live above the private ranges of all 16 possible cores, so
    /// their placement does not depend on the core count.
    pub fn lock_addr(&self, lock: usize) -> u64 {
        let base = (MAX_CORES as u64 * self.private_bytes).next_multiple_of(self.lock_stride);
        base + lock as u64 * self.lock_stride
    }

    pub fn private_base(&self, core: CoreId) -> u64 {
        core as u64 * self.private_bytes
    }

    pub(crate) fn address_bound(&self) -> u64 {
        self.lock_addr(LOCK_COUNT)
    }
}

/// Cores contending for three shared locks.
///
/// Each step picks a core uniformly. With probability 0.10 it touches a
/// uniformly chosen lock: the holder releases it with one store; anyone else
/// tests it with a load and, when the lock is free, takes it with a store.
/// Otherwise the core accesses its private range (two loads per store).
pub struct LocksGenerator {
    params: LocksParams,
    num_cores: usize,
    remaining: u64,
    rng: ChaCha8Rng,
    holders: [Option<CoreId>; LOCK_COUNT],
    pending: Pending,
    steps: u64,
    lock_steps: u64,
}

impl LocksGenerator {
    pub fn new(params: LocksParams, num_cores: usize, num_refs: u64, seed: u64) -> Self {
        LocksGenerator {
            params,
            num_cores,
            remaining: num_refs,
            rng: rng(seed),
            holders: [None; LOCK_COUNT],
            pending: Pending::default(),
            steps: 0,
            lock_steps: 0,
        }
    }

    /// Current owner of each lock in the ownership model.
    pub fn holders(&self) -> &[Option<CoreId>; LOCK_COUNT] {
        &self.holders
    }

    /// Steps taken so far and how many of them targeted a lock.
    pub fn step_counts(&self) -> (u64, u64) {
        (self.steps, self.lock_steps)
    }

    fn step(&mut self) {
        self.steps += 1;
        let core = self.rng.gen_range(0..self.num_cores);
        if self.rng.gen_bool(LOCK_PROBABILITY) {
            self.lock_steps += 1;
            let lock = self.rng.gen_range(0..LOCK_COUNT);
            let addr = self.params.lock_addr(lock);
            match self.holders[lock] {
                Some(h) if h == core => {
                    self.pending.push(MemoryRef::store(core, addr));
                    self.holders[lock] = None;
                }
                Some(_) => self.pending.push(MemoryRef::load(core, addr)),
                None => {
                    self.pending.push(MemoryRef::load(core, addr));
                    self.pending.push(MemoryRef::store(core, addr));
                    self.holders[lock] = Some(core);
                }
            }
        } else {
            let addr = self.params.private_base(core) + word_offset(&mut self.rng, self.params.private_bytes);
            if self.rng.gen_bool(PRIVATE_STORE_PROBABILITY) {
                self.pending.push(MemoryRef::store(core, addr));
            } else {
                self.pending.push(MemoryRef::load(core, addr));
            }
        }
    }
}

impl Iterator for LocksGenerator {
    type Item = MemoryRef;

    fn next(&mut self) -> Option<MemoryRef> {
        if self.remaining == 0 {
            return None;
        }
        let r = loop {
            if let Some(r) = self.pending.pop() {
                break r;
            }
            self.step();
        };
        self.remaining -= 1;
        Some(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Op;

    #[test]
    fn addresses_are_locks_or_own_private_range() {
        let p = LocksParams::default();
        let locks: Vec<u64> = (0..LOCK_COUNT).map(|l| p.lock_addr(l)).collect();
        assert_eq!(locks.len(), 3);
        assert!(locks.iter().all(|a| a % 64 == 0));
        for r in LocksGenerator::new(p, 8, 200_000, 5) {
            let private = p.private_base(r.core)..p.private_base(r.core) + p.private_bytes;
            assert!(locks.contains(&r.addr) || private.contains(&r.addr), "{r:?}");
            assert!(!private.contains(&p.lock_addr(0)));
        }
    }

    #[test]
    fn lock_fraction_is_ten_percent() {
        let mut g = LocksGenerator::new(LocksParams::default(), 8, u64::MAX, 11);
        while g.step_counts().0 < 1_000_000 {
            g.next();
        }
        let (steps, lock_steps) = g.step_counts();
        let frac = lock_steps as f64 / steps as f64;
        assert!((frac - 0.10).abs() <= 0.01, "{frac}");
    }

    #[test]
    fn at_most_one_holder_and_protocol_is_respected() {
        // Replay the emitted stream against an independent ownership model.
        let p = LocksParams::default();
        let mut owner: [Option<CoreId>; LOCK_COUNT] = [None; LOCK_COUNT];
        let mut last_test: Option<(CoreId, usize)> = None;
        let g = LocksGenerator::new(p, 4, 100_000, 3);
        for r in g {
            let Some(lock) = (0..LOCK_COUNT).find(|&l| p.lock_addr(l) == r.addr) else {
                last_test = None;
                continue;
            };
            match r.op {
                Op::Load => {
                    assert_ne!(owner[lock], Some(r.core), "holder never tests its own lock");
                    last_test = Some((r.core, lock));
                }
                Op::Store if owner[lock] == Some(r.core) => {
                    owner[lock] = None;
                    last_test = None;
                }
                Op::Store => {
                    assert_eq!(owner[lock], None, "acquire only when free");
                    assert_eq!(last_test, Some((r.core, lock)), "acquire follows a test");
                    owner[lock] = Some(r.core);
                    last_test = None;
                }
            }
        }
    }

    #[test]
    fn private_mix_is_two_to_one() {
        let p = LocksParams::default();
        let (mut loads, mut stores) = (0u64, 0u64);
        for r in LocksGenerator::new(p, 2, 300_000, 8) {
            if r.addr < p.lock_addr(0) {
                match r.op {
                    Op::Load => loads += 1,
                    Op::Store => stores += 1,
                }
            }
        }
        let ratio = loads as f64 / stores as f64;
        assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
    }
}
