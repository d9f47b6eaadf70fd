//! Set-associative storage for one core.
//!
//! Resident lines in a set carry distinct LRU ranks `0..n` where `n` is the
//! number of occupied ways and rank 0 is the most recently used line.

use crate::types::{CacheGeometry, CacheLine, CoherenceState};

#[derive(Clone, Debug)]
pub(crate) struct Cache {
    ways: usize,
    slots: Vec<Option<CacheLine>>,
}

impl Cache {
    pub(crate) fn new(geom: &CacheGeometry) -> Self {
        Cache {
            ways: geom.ways(),
            slots: vec![None; geom.lines_per_cache()],
        }
    }

    pub(crate) fn set(&self, set: usize) -> &[Option<CacheLine>] {
        &self.slots[set * self.ways..(set + 1) * self.ways]
    }

    fn set_mut(&mut self, set: usize) -> &mut [Option<CacheLine>] {
        &mut self.slots[set * self.ways..(set + 1) * self.ways]
    }

    /// Way holding `tag`, in any state including `I`.
    pub(crate) fn find(&self, set: usize, tag: u64) -> Option<usize> {
        self.set(set)
            .iter()
            .position(|s| matches!(s, Some(l) if l.tag == tag))
    }

    pub(crate) fn lookup(&self, set: usize, tag: u64) -> Option<&CacheLine> {
        self.find(set, tag).and_then(|w| self.set(set)[w].as_ref())
    }

    pub(crate) fn line_mut(&mut self, set: usize, way: usize) -> &mut CacheLine {
        self.set_mut(set)[way].as_mut().expect("occupied way")
    }

    /// Marks `way` as most recently used.
    pub(crate) fn touch(&mut self, set: usize, way: usize) {
        let lines = self.set_mut(set);
        let rank = lines[way].as_ref().expect("occupied way").recency;
        for line in lines.iter_mut().flatten() {
            if line.recency < rank {
                line.recency += 1;
            }
        }
        lines[way].as_mut().unwrap().recency = 0;
    }

    /// Way to fill next: an empty way, else the least recently used `I`
    /// line, else the least recently used line.
    pub(crate) fn choose_victim(&self, set: usize) -> usize {
        let lines = self.set(set);
        if let Some(w) = lines.iter().position(Option::is_none) {
            return w;
        }
        let lru = |want_invalid: bool| {
            lines
                .iter()
                .enumerate()
                .filter_map(|(w, l)| l.as_ref().map(|l| (w, l)))
                .filter(|(_, l)| !want_invalid || l.state == CoherenceState::I)
                .max_by_key(|(_, l)| l.recency)
                .map(|(w, _)| w)
        };
        lru(true).or_else(|| lru(false)).expect("full set has a line")
    }

    /// Puts `line` into `way` (replacing whatever was there) and makes it
    /// most recently used. Returns the displaced line.
    pub(crate) fn install(&mut self, set: usize, way: usize, mut line: CacheLine) -> Option<CacheLine> {
        let lines = self.set_mut(set);
        let occupied = lines.iter().filter(|l| l.is_some()).count() as u8;
        let old = lines[way].take();
        line.recency = match &old {
            Some(o) => o.recency,
            None => occupied,
        };
        lines[way] = Some(line);
        self.touch(set, way);
        old
    }

    /// Empties `way`, closing the gap it leaves in the set's LRU ranks.
    pub(crate) fn remove(&mut self, set: usize, way: usize) -> Option<CacheLine> {
        let lines = self.set_mut(set);
        let old = lines[way].take()?;
        for line in lines.iter_mut().flatten() {
            if line.recency > old.recency {
                line.recency -= 1;
            }
        }
        Some(old)
    }

    /// All occupied lines with their set index.
    pub(crate) fn lines(&self) -> impl Iterator<Item = (usize, &CacheLine)> + '_ {
        let ways = self.ways;
        self.slots
            .iter()
            .enumerate()
            .filter_map(move |(i, l)| l.as_ref().map(|l| (i / ways, l)))
    }

    #[cfg(test)]
    pub(crate) fn slot_mut(&mut self, set: usize, way: usize) -> &mut Option<CacheLine> {
        &mut self.set_mut(set)[way]
    }
}
