#![allow(dead_code)]

pub mod oracle;

use moesi_sim::{CacheGeometry, CoherenceState, Engine, MemoryRef, Scheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALL_FIVE: [Scheme; 5] = [
    Scheme::InvalidateOnly,
    Scheme::UpdateOnly,
    Scheme::Threshold { threshold: 1 },
    Scheme::AdaptedMoesi,
    Scheme::NumSharers { min_sharers: 2 },
];

/// Uniform random references over `blocks` blocks of 64 bytes, with word
/// offsets inside each block.
pub fn uniform_trace(
    cores: usize,
    refs: usize,
    blocks: u64,
    store_p: f64,
    seed: u64,
) -> impl Iterator<Item = MemoryRef> + Send {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..refs).map(move |_| {
        let core = rng.gen_range(0..cores);
        let addr = rng.gen_range(0..blocks) * 64 + rng.gen_range(0..16) * 4;
        if rng.gen_bool(store_p) {
            MemoryRef::store(core, addr)
        } else {
            MemoryRef::load(core, addr)
        }
    })
}

/// `(block, state, counter)` for every resident line of every core, sorted.
pub fn engine_snapshot(e: &Engine) -> Vec<Vec<(u64, CoherenceState, u8)>> {
    (0..e.geometry().num_cores())
        .map(|c| {
            let mut v: Vec<_> = e.resident_lines(c).map(|(b, l)| (b, l.state, l.counter)).collect();
            v.sort_by_key(|t| t.0);
            v
        })
        .collect()
}

pub fn geometry(sets: usize, ways: usize, cores: usize) -> CacheGeometry {
    CacheGeometry::new(sets, ways, 64, cores).unwrap()
}
