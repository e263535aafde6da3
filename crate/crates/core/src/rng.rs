//! Seed streams.
//!
//! Every replica gets its own ChaCha8 stream. The key is expanded from the
//! master seed by `seed_from_u64`; the 64-bit stream id is
//! `(fnv1a32(tag) << 32) | replica`. Two replicas of the same experiment never
//! share a keystream, and a result can be reproduced from
//! `(seed, tag, replica)` alone regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type SimRng = ChaCha8Rng;

pub fn tag_hash(tag: &str) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for b in tag.bytes() {
        h ^= b as u32;
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

pub fn stream(seed: u64, tag: &str, replica: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((tag_hash(tag) as u64) << 32) | (replica & 0xffff_ffff));
    rng
}

/// Runs `f` once per replica on the rayon pool; results come back in
/// replica order so downstream reductions are deterministic.
pub fn replicate<T, F>(seed: u64, tag: &str, replicas: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> T + Sync + Send,
{
    (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, tag, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

#[inline]
pub fn exp_time<R: rand::Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}
