//! Omniscient sharer directory: for every block, the cores holding it in a
//! valid state.

use std::collections::HashMap;

use crate::types::CoreId;

/// Bitmask of core ids (at most 16 cores).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CoreSet(u16);

impl CoreSet {
    pub fn empty() -> Self {
        CoreSet(0)
    }

    pub fn contains(self, core: CoreId) -> bool {
        self.0 & (1 << core) != 0
    }

    pub fn insert(&mut self, core: CoreId) {
        self.0 |= 1 << core;
    }

    pub fn remove(&mut self, core: CoreId) {
        self.0 &= !(1 << core);
    }

    pub fn without(self, core: CoreId) -> Self {
        CoreSet(self.0 & !(1 << core))
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = CoreId> {
        let bits = self.0;
        (0..16).filter(move |c| bits & (1 << c) != 0)
    }
}

impl FromIterator<CoreId> for CoreSet {
    fn from_iter<T: IntoIterator<Item = CoreId>>(iter: T) -> Self {
        let mut s = CoreSet::empty();
        for c in iter {
            s.insert(c);
        }
        s
    }
}

#[derive(Clone, Debug, Default)]
pub struct SharerDirectory {
    entries: HashMap<u64, CoreSet>,
}

impl SharerDirectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sharers(&self, block: u64) -> CoreSet {
        self.entries.get(&block).copied().unwrap_or_default()
    }

    pub fn add(&mut self, block: u64, core: CoreId) {
        self.entries.entry(block).or_default().insert(core);
    }

    pub fn remove(&mut self, block: u64, core: CoreId) {
        if let Some(set) = self.entries.get_mut(&block) {
            set.remove(core);
            if set.is_empty() {
                self.entries.remove(&block);
            }
        }
    }

    /// Blocks with at least one sharer.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn blocks(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.keys().copied()
    }
}
