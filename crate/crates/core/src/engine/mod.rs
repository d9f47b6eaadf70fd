//! The snooping MOESI engine.
//!
//! References are applied one at a time in trace order, which is also the
//! global coherence order. Transitions:
//!
//! | local op | line state | bus request       | result                                   |
//! |----------|------------|-------------------|------------------------------------------|
//! | read     | M/O/E/S    | none              | unchanged                                |
//! | read     | I / absent | `ReadReq`         | S if another valid copy exists, else E   |
//! | write    | M          | none              | M                                        |
//! | write    | E          | none              | M                                        |
//! | write    | O/S/I/abs. | scheme decides    | invalidate: M; update: O if sharers, else M |
//!
//! A write miss fetches the block and claims ownership with a single
//! `InvalidateReq` or `UpdateReq`; no separate `ReadReq` is issued.
//!
//! Snooped effects: a `ReadReq` bumps the counter of every valid remote copy
//! and demotes M to O and E to S; an `InvalidateReq` moves remote copies to I
//! (they keep their counters until the way is reclaimed or refilled); an
//! `UpdateReq` refreshes remote copies and moves them to S.

mod cache;
mod directory;
mod verify;

pub use directory::{CoreSet, SharerDirectory};
pub use verify::{Violation, ViolationKind};

use cache::Cache;
use verify::VersionTracker;

use crate::error::SimError;
use crate::metrics::{EventKind, MetricsTable};
use crate::scheme::{decide, PolicyDecision, SchemeConfig, WriteContext};
use crate::trace::ReadError;
use crate::types::{
    BlockLocation, BusTransaction, CacheGeometry, CacheLine, CoherenceState, CoreId, MemoryRef,
    Op, TxnKind,
};

/// A dirty line leaving a cache.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Writeback {
    pub core: CoreId,
    pub block: u64,
}

/// What the other caches reported while snooping a request.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct SnoopReply {
    /// Remote caches that held a valid copy when the request was seen.
    sharers: u32,
    /// Data version supplied by a remote M/O owner, if any.
    owner_version: Option<u64>,
}

#[derive(Clone)]
pub struct Engine {
    geometry: CacheGeometry,
    scheme: SchemeConfig,
    caches: Vec<Cache>,
    directory: SharerDirectory,
    metrics: MetricsTable,
    versions: Option<VersionTracker>,
    steps: u64,
    evicted: Vec<u64>,
    pending: Option<Violation>,
}

impl Engine {
    pub fn new(geometry: CacheGeometry, scheme: impl Into<SchemeConfig>) -> Self {
        let n = geometry.num_cores();
        Engine {
            geometry,
            scheme: scheme.into(),
            caches: (0..n).map(|_| Cache::new(&geometry)).collect(),
            directory: SharerDirectory::new(),
            metrics: MetricsTable::new(n),
            versions: None,
            steps: 0,
            evicted: Vec::new(),
            pending: None,
        }
    }

    /// An engine that tracks data versions and checks every invariant on
    /// the blocks touched by each step.
    pub fn verifying(geometry: CacheGeometry, scheme: impl Into<SchemeConfig>) -> Self {
        let mut e = Self::new(geometry, scheme);
        e.versions = Some(VersionTracker::default());
        e
    }

    pub fn geometry(&self) -> &CacheGeometry {
        &self.geometry
    }

    pub fn scheme(&self) -> &SchemeConfig {
        &self.scheme
    }

    pub fn metrics(&self) -> &MetricsTable {
        &self.metrics
    }

    pub fn into_metrics(self) -> MetricsTable {
        self.metrics
    }

    pub fn directory(&self) -> &SharerDirectory {
        &self.directory
    }

    pub fn is_verifying(&self) -> bool {
        self.versions.is_some()
    }

    /// References processed so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// The resident line for `addr` in `core`'s cache, in any state.
    pub fn line(&self, core: CoreId, addr: u64) -> Option<&CacheLine> {
        let loc = self.geometry.block_of(addr);
        self.caches[core].lookup(loc.set_index, loc.tag)
    }

    /// State of `addr` in `core`'s cache; `I` when not resident.
    pub fn state(&self, core: CoreId, addr: u64) -> CoherenceState {
        self.line(core, addr).map_or(CoherenceState::I, |l| l.state)
    }

    /// Resident lines of `core` as `(block number, line)` pairs.
    pub fn resident_lines(&self, core: CoreId) -> impl Iterator<Item = (u64, &CacheLine)> + '_ {
        self.caches[core]
            .lines()
            .map(move |(set, l)| (self.geometry.block_from_parts(l.tag, set), l))
    }

    /// Applies one reference.
    pub fn step(&mut self, r: MemoryRef) -> Result<Option<BusTransaction>, SimError> {
        self.step_at(r, self.steps + 1)
    }

    /// Like [`Engine::step`], reporting errors against trace line `line`.
    pub fn step_at(&mut self, r: MemoryRef, line: u64) -> Result<Option<BusTransaction>, SimError> {
        if r.core >= self.geometry.num_cores() {
            return Err(SimError::CoreOutOfRange {
                line,
                core: r.core,
                num_cores: self.geometry.num_cores(),
            });
        }
        self.steps += 1;
        self.evicted.clear();
        let txn = match r.op {
            Op::Load => {
                self.metrics.record(r.core, EventKind::Load);
                self.local_read(r.core, r.addr)
            }
            Op::Store => {
                self.metrics.record(r.core, EventKind::Store);
                self.local_write(r.core, r.addr)
            }
        };
        if self.versions.is_some() {
            let violation = self.pending.take().or_else(|| {
                let block = self.geometry.block_number(r.addr);
                std::iter::once(block)
                    .chain(self.evicted.iter().copied())
                    .find_map(|b| self.check_block(b).err())
            });
            if let Some(violation) = violation {
                return Err(SimError::Violation { step: line, violation });
            }
        }
        Ok(txn)
    }

    /// Processor read. Emits a `ReadReq` on a miss.
    pub fn local_read(&mut self, core: CoreId, addr: u64) -> Option<BusTransaction> {
        let loc = self.geometry.block_of(addr);
        let ceiling = self.scheme.counter_ceiling;
        if let Some(way) = self.caches[core].find(loc.set_index, loc.tag) {
            let line = self.caches[core].line_mut(loc.set_index, way);
            if line.state.is_valid() {
                if self.scheme.count_local_reads {
                    line.counter = line.counter.saturating_add(1).min(ceiling);
                }
                self.caches[core].touch(loc.set_index, way);
                self.check_read(core, loc);
                return None;
            }
        }

        let txn = BusTransaction {
            kind: TxnKind::ReadReq,
            issuer: core,
            block: loc.block_number,
        };
        let way = self.make_room(core, loc);
        let reply = self.snoop(txn);
        let state = if reply.sharers > 0 {
            CoherenceState::S
        } else {
            CoherenceState::E
        };
        let version = match (&self.versions, reply.owner_version) {
            (Some(_), Some(v)) => v,
            (Some(vt), None) => vt.memory(loc.block_number),
            (None, _) => 0,
        };
        self.fill(core, loc, way, state, version);
        self.check_read(core, loc);
        self.metrics.record(core, EventKind::ReadReq);
        Some(txn)
    }

    /// Processor write. Silent in M and E; otherwise the scheme picks an
    /// invalidate or an update.
    pub fn local_write(&mut self, core: CoreId, addr: u64) -> Option<BusTransaction> {
        let loc = self.geometry.block_of(addr);
        let block = loc.block_number;
        let found = self.caches[core].find(loc.set_index, loc.tag);
        let (state, counter) = found
            .map(|w| {
                let l = self.caches[core].set(loc.set_index)[w].as_ref().unwrap();
                (l.state, l.counter)
            })
            .unwrap_or((CoherenceState::I, 0));

        let (way, txn) = match state {
            CoherenceState::M | CoherenceState::E => {
                let way = found.unwrap();
                self.caches[core].line_mut(loc.set_index, way).state = CoherenceState::M;
                (way, None)
            }
            CoherenceState::O | CoherenceState::S | CoherenceState::I => {
                let remote = self.directory.sharers(block).without(core);
                let ctx = WriteContext {
                    writer_state: state,
                    counter,
                    remote_sharers: remote.len(),
                };
                let kind = match decide(self.scheme.scheme, ctx) {
                    PolicyDecision::Invalidate => TxnKind::InvalidateReq,
                    PolicyDecision::Update => TxnKind::UpdateReq,
                };
                let way = if state.is_valid() {
                    found.unwrap()
                } else {
                    self.make_room(core, loc)
                };
                let txn = BusTransaction { kind, issuer: core, block };
                let previous = self.versions.as_ref().map(|vt| vt.latest(block));
                if let Some(vt) = self.versions.as_mut() {
                    vt.bump(block);
                }
                let reply = self.snoop(txn);
                if let (Some(latest), false) = (previous, state.is_valid()) {
                    let fetched = reply
                        .owner_version
                        .unwrap_or_else(|| self.versions.as_ref().unwrap().memory(block));
                    if fetched != latest && self.pending.is_none() {
                        self.pending = Some(self.violation(
                            block,
                            ViolationKind::StaleFetch { core, fetched, latest },
                        ));
                    }
                }
                let new_state = match (kind, reply.sharers) {
                    (TxnKind::UpdateReq, n) if n > 0 => CoherenceState::O,
                    _ => CoherenceState::M,
                };
                self.fill(core, loc, way, new_state, 0);
                self.metrics.record(core, kind.into());
                (way, Some(txn))
            }
        };

        let version = match self.versions.as_mut() {
            // Silent writes have not allocated a stamp yet.
            Some(vt) if txn.is_none() => vt.bump(block),
            Some(vt) => vt.latest(block),
            None => 0,
        };
        let cache = &mut self.caches[core];
        let line = cache.line_mut(loc.set_index, way);
        line.counter = line.counter.saturating_sub(1);
        line.version = version;
        cache.touch(loc.set_index, way);
        txn
    }

    /// Applies `txn` to every other cache holding a valid copy.
    fn snoop(&mut self, txn: BusTransaction) -> SnoopReply {
        let loc = self.geometry.locate_block(txn.block);
        let remote = self.directory.sharers(txn.block).without(txn.issuer);
        let ceiling = self.scheme.counter_ceiling;
        let latest = self.versions.as_ref().map_or(0, |vt| vt.latest(txn.block));
        let mut reply = SnoopReply {
            sharers: remote.len(),
            owner_version: None,
        };
        for core in remote.iter() {
            let way = self.caches[core]
                .find(loc.set_index, loc.tag)
                .expect("directory lists a resident copy");
            let line = self.caches[core].line_mut(loc.set_index, way);
            if line.state.is_owner() {
                reply.owner_version = Some(line.version);
            }
            match txn.kind {
                TxnKind::ReadReq => {
                    line.counter = line.counter.saturating_add(1).min(ceiling);
                    line.state = match line.state {
                        CoherenceState::M => CoherenceState::O,
                        CoherenceState::E => CoherenceState::S,
                        s => s,
                    };
                }
                TxnKind::InvalidateReq => {
                    line.state = CoherenceState::I;
                    self.directory.remove(txn.block, core);
                }
                TxnKind::UpdateReq => {
                    line.state = CoherenceState::S;
                    line.version = latest;
                }
            }
        }
        reply
    }

    /// Frees a way in `set_index` of `core`'s cache, writing back a dirty
    /// victim. Returns the freed way and the writeback, if any.
    pub fn evict_victim(&mut self, core: CoreId, set_index: usize) -> (usize, Option<Writeback>) {
        let way = self.caches[core].choose_victim(set_index);
        let Some(victim) = self.caches[core].remove(set_index, way) else {
            return (way, None);
        };
        let block = self.geometry.block_from_parts(victim.tag, set_index);
        if victim.state.is_valid() {
            self.directory.remove(block, core);
            self.evicted.push(block);
        }
        if !victim.state.is_owner() {
            return (way, None);
        }
        self.metrics.record(core, EventKind::Writeback);
        if let Some(vt) = self.versions.as_mut() {
            vt.write_back(block, victim.version);
        }
        (way, Some(Writeback { core, block }))
    }

    /// Way for `loc`: the resident (invalid) line if present, else a freshly
    /// evicted way.
    fn make_room(&mut self, core: CoreId, loc: BlockLocation) -> usize {
        match self.caches[core].find(loc.set_index, loc.tag) {
            Some(way) => way,
            None => self.evict_victim(core, loc.set_index).0,
        }
    }

    /// Brings `loc` into `way` in `state`. A valid line (write hit) keeps its
    /// counter; any fill, including a refill of a line resident in `I`,
    /// starts at 0.
    fn fill(&mut self, core: CoreId, loc: BlockLocation, way: usize, state: CoherenceState, version: u64) {
        let cache = &mut self.caches[core];
        match cache.set(loc.set_index)[way] {
            Some(l) if l.tag == loc.tag => {
                let line = cache.line_mut(loc.set_index, way);
                if !line.state.is_valid() {
                    line.counter = 0;
                }
                line.state = state;
                line.version = version;
                cache.touch(loc.set_index, way);
            }
            _ => {
                cache.install(
                    loc.set_index,
                    way,
                    CacheLine {
                        tag: loc.tag,
                        state,
                        counter: 0,
                        recency: 0,
                        version,
                    },
                );
            }
        }
        self.directory.add(loc.block_number, core);
    }

    fn check_read(&mut self, core: CoreId, loc: BlockLocation) {
        let Some(vt) = &self.versions else { return };
        let latest = vt.latest(loc.block_number);
        let observed = self.caches[core]
            .lookup(loc.set_index, loc.tag)
            .map_or(0, |l| l.version);
        if observed != latest && self.pending.is_none() {
            self.pending = Some(self.violation(
                loc.block_number,
                ViolationKind::StaleRead { core, observed, latest },
            ));
        }
    }

    fn holders(&self, block: u64) -> Vec<(CoreId, CacheLine)> {
        let loc = self.geometry.locate_block(block);
        self.caches
            .iter()
            .enumerate()
            .filter_map(|(core, c)| c.lookup(loc.set_index, loc.tag).map(|l| (core, *l)))
            .collect()
    }

    fn violation(&self, block: u64, kind: ViolationKind) -> Violation {
        Violation {
            block,
            kind,
            holders: self
                .holders(block)
                .into_iter()
                .map(|(c, l)| (c, l.state))
                .collect(),
        }
    }

    /// Checks every invariant for a single block.
    pub fn check_block(&self, block: u64) -> Result<(), Violation> {
        let holders = self.holders(block);
        let valid: Vec<_> = holders.iter().filter(|(_, l)| l.state.is_valid()).collect();
        let fail = |kind| Err(self.violation(block, kind));

        if valid.iter().filter(|(_, l)| l.state.is_owner()).count() > 1 {
            return fail(ViolationKind::MultipleOwners);
        }
        if valid.len() > 1 && valid.iter().any(|(_, l)| l.state.is_exclusive()) {
            return fail(ViolationKind::ExclusiveNotAlone);
        }
        let actual: CoreSet = valid.iter().map(|(c, _)| *c).collect();
        let listed = self.directory.sharers(block);
        if actual != listed {
            return fail(ViolationKind::DirectoryMismatch {
                directory: listed.iter().collect(),
                caches: actual.iter().collect(),
            });
        }
        for (core, l) in &holders {
            if l.counter > self.scheme.counter_ceiling {
                return fail(ViolationKind::CounterOverflow {
                    core: *core,
                    counter: l.counter,
                    ceiling: self.scheme.counter_ceiling,
                });
            }
        }
        if let Some(vt) = &self.versions {
            let latest = vt.latest(block);
            for (core, l) in &valid {
                if l.version != latest {
                    return fail(ViolationKind::StaleCopy {
                        core: *core,
                        version: l.version,
                        latest,
                    });
                }
            }
            let memory = vt.memory(block);
            if !valid.iter().any(|(_, l)| l.state.is_owner()) && memory != latest {
                return fail(ViolationKind::StaleMemory { memory, latest });
            }
        }
        Ok(())
    }

    /// Full rescan of every cache and the directory.
    pub fn verify_invariants(&self) -> Result<(), Violation> {
        let mut blocks: Vec<u64> = self.directory.blocks().collect();
        for (core, cache) in self.caches.iter().enumerate() {
            let mut ranks = vec![0u64; self.geometry.num_sets()];
            for (set, line) in cache.lines() {
                blocks.push(self.geometry.block_from_parts(line.tag, set));
                let bit = 1u64 << line.recency.min(63);
                if ranks[set] & bit != 0 {
                    return Err(Violation {
                        block: self.geometry.block_from_parts(line.tag, set),
                        kind: ViolationKind::RecencyCollision { core, set },
                        holders: Vec::new(),
                    });
                }
                ranks[set] |= bit;
            }
        }
        blocks.sort_unstable();
        blocks.dedup();
        blocks.into_iter().try_for_each(|b| self.check_block(b))
    }
}

/// Runs a parsed trace of `(line number, reference)` pairs to completion.
pub fn run<I>(
    trace: I,
    geometry: CacheGeometry,
    scheme: impl Into<SchemeConfig>,
    verify: bool,
) -> Result<MetricsTable, SimError>
where
    I: IntoIterator<Item = Result<(u64, MemoryRef), ReadError>>,
{
    let mut engine = if verify {
        Engine::verifying(geometry, scheme)
    } else {
        Engine::new(geometry, scheme)
    };
    for item in trace {
        let (line, r) = item.map_err(|e| match e {
            ReadError::Parse(p) => SimError::Trace(p),
            ReadError::Io { source, .. } => SimError::Io(source),
        })?;
        engine.step_at(r, line)?;
    }
    if verify {
        engine
            .verify_invariants()
            .map_err(|violation| SimError::Violation {
                step: engine.steps(),
                violation,
            })?;
    }
    Ok(engine.into_metrics())
}

/// Runs in-memory references; errors report the 1-based reference index.
pub fn run_refs<I>(
    refs: I,
    geometry: CacheGeometry,
    scheme: impl Into<SchemeConfig>,
    verify: bool,
) -> Result<MetricsTable, SimError>
where
    I: IntoIterator<Item = MemoryRef>,
{
    run(
        refs.into_iter().zip(1..).map(|(r, i)| Ok((i, r))),
        geometry,
        scheme,
        verify,
    )
}
