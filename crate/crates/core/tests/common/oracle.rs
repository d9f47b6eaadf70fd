//! Brute-force reference simulator.
//!
//! Each cache is a flat list of resident lines stamped with the time of their
//! last use. Every step rescans all caches; there is no sharer directory and
//! no shared code with the engine beyond the plain data types.

use moesi_sim::{CoherenceState, CoreCounts, MemoryRef, Op, Scheme};

use CoherenceState::{E, I, M, O, S};

#[derive(Clone, Copy, Debug)]
struct Line {
    block: u64,
    state: CoherenceState,
    counter: u8,
    used: u64,
}

pub struct Oracle {
    sets: u64,
    ways: usize,
    block_size: u64,
    scheme: Scheme,
    ceiling: u8,
    count_local_reads: bool,
    caches: Vec<Vec<Line>>,
    clock: u64,
    pub counts: Vec<CoreCounts>,
}

impl Oracle {
    pub fn new(sets: usize, ways: usize, block_size: u64, cores: usize, scheme: Scheme) -> Self {
        Oracle {
            sets: sets as u64,
            ways,
            block_size,
            scheme,
            ceiling: 15,
            count_local_reads: false,
            caches: vec![Vec::new(); cores],
            clock: 0,
            counts: vec![CoreCounts::default(); cores],
        }
    }

    pub fn ceiling(mut self, c: u8) -> Self {
        self.ceiling = c;
        self
    }

    pub fn local_reads(mut self, on: bool) -> Self {
        self.count_local_reads = on;
        self
    }

    pub fn snapshot(&self) -> Vec<Vec<(u64, CoherenceState, u8)>> {
        self.caches
            .iter()
            .map(|c| {
                let mut v: Vec<_> = c.iter().map(|l| (l.block, l.state, l.counter)).collect();
                v.sort_by_key(|t| t.0);
                v
            })
            .collect()
    }

    fn wants_update(&self, state: CoherenceState, counter: u8, others: usize) -> bool {
        match self.scheme {
            Scheme::InvalidateOnly => false,
            Scheme::UpdateOnly => true,
            Scheme::Threshold { threshold } => counter as u32 >= threshold,
            Scheme::AdaptedMoesi => state == O,
            Scheme::NumSharers { min_sharers } => others as u32 >= min_sharers,
        }
    }

    fn pos(&self, core: usize, block: u64) -> Option<usize> {
        self.caches[core].iter().position(|l| l.block == block)
    }

    fn valid_elsewhere(&self, core: usize, block: u64) -> usize {
        (0..self.caches.len())
            .filter(|&c| c != core)
            .filter(|&c| self.caches[c].iter().any(|l| l.block == block && l.state != I))
            .count()
    }

    /// Makes room for `block` in `core`'s cache if it is not already there.
    fn allocate(&mut self, core: usize, block: u64) -> usize {
        if let Some(i) = self.pos(core, block) {
            return i;
        }
        let set = block % self.sets;
        let in_set: Vec<usize> = (0..self.caches[core].len())
            .filter(|&i| self.caches[core][i].block % self.sets == set)
            .collect();
        if in_set.len() == self.ways {
            let oldest = |only_invalid: bool| {
                in_set
                    .iter()
                    .copied()
                    .filter(|&i| !only_invalid || self.caches[core][i].state == I)
                    .min_by_key(|&i| self.caches[core][i].used)
            };
            let victim = oldest(true).or_else(|| oldest(false)).unwrap();
            let gone = self.caches[core].remove(victim);
            if gone.state == M || gone.state == O {
                self.counts[core].writebacks += 1;
            }
        }
        self.caches[core].push(Line { block, state: I, counter: 0, used: 0 });
        self.caches[core].len() - 1
    }

    pub fn step(&mut self, r: MemoryRef) {
        self.clock += 1;
        let now = self.clock;
        let block = r.addr / self.block_size;
        let core = r.core;
        match r.op {
            Op::Load => {
                self.counts[core].loads += 1;
                if let Some(i) = self.pos(core, block).filter(|&i| self.caches[core][i].state != I) {
                    let l = &mut self.caches[core][i];
                    if self.count_local_reads {
                        l.counter = (l.counter + 1).min(self.ceiling);
                    }
                    l.used = now;
                    return;
                }
                self.counts[core].read_reqs += 1;
                let others = self.valid_elsewhere(core, block);
                for c in 0..self.caches.len() {
                    if c == core {
                        continue;
                    }
                    for l in self.caches[c].iter_mut().filter(|l| l.block == block && l.state != I) {
                        l.counter = (l.counter + 1).min(self.ceiling);
                        l.state = match l.state {
                            M => O,
                            E => S,
                            s => s,
                        };
                    }
                }
                let i = self.allocate(core, block);
                let l = &mut self.caches[core][i];
                l.state = if others > 0 { S } else { E };
                l.counter = 0;
                l.used = now;
            }
            Op::Store => {
                self.counts[core].stores += 1;
                let current = self.pos(core, block).map(|i| self.caches[core][i]);
                let state = current.map_or(I, |l| l.state);
                if state == M || state == E {
                    let i = self.pos(core, block).unwrap();
                    let l = &mut self.caches[core][i];
                    l.state = M;
                    l.counter = l.counter.saturating_sub(1);
                    l.used = now;
                    return;
                }
                let counter = current.map_or(0, |l| l.counter);
                let others = self.valid_elsewhere(core, block);
                let update = self.wants_update(state, counter, others);
                for c in 0..self.caches.len() {
                    if c == core {
                        continue;
                    }
                    for l in self.caches[c].iter_mut().filter(|l| l.block == block && l.state != I) {
                        l.state = if update { S } else { I };
                    }
                }
                if update {
                    self.counts[core].updates += 1;
                } else {
                    self.counts[core].invalidates += 1;
                }
                let i = self.allocate(core, block);
                let l = &mut self.caches[core][i];
                if l.state == I {
                    l.counter = 0;
                }
                l.state = if update && others > 0 { O } else { M };
                l.counter = l.counter.saturating_sub(1);
                l.used = now;
            }
        }
    }
}
