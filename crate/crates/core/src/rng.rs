//! Deterministic RNG sub-streams.
//!
//! Every random draw in a run flows from the single configured seed. Each
//! consumer (workload generation, mobility, detector mistakes) gets its own
//! sub-stream so that, e.g., swapping the router cannot perturb mobility.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for sub-stream derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Workload,
    Mobility,
    Detector,
}

impl Stream {
    pub fn tag(self) -> u64 {
        match self {
            Stream::Workload => 0x574b4c44,
            Stream::Mobility => 0x4d4f4249,
            Stream::Detector => 0x44455443,
        }
    }
}

/// splitmix64 finalizer; good avalanche, cheap, stable across platforms.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// RNG for one purpose-keyed sub-stream of `seed`.
pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(stream.tag())))
}

/// Uniform draw in [0,1) that is a pure function of its key. Used by the
/// oracle detector so a (seed, pair) verdict is identical at every call site.
pub fn keyed_unit(seed: u64, a: u64, b: u64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let h = mix64(mix64(seed).wrapping_add(mix64(lo)).wrapping_add(mix64(hi).rotate_left(17)));
    // 53 high bits -> [0,1)
    (h >> 11) as f64 / (1u64 << 53) as f64
}
