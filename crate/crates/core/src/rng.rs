//! Deterministic RNG streams.
//!
//! Every stochastic component derives its own ChaCha stream from a master
//! seed plus a salt and index, so results do not depend on worker count or
//! evaluation order.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 mixing step, used to decorrelate derived seeds.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `(master, salt, index)`.
pub fn derive_seed(master: u64, salt: u64, index: u64) -> u64 {
    let mut state = master ^ 0x6a09_e667_f3bc_c908;
    let a = splitmix64(&mut state);
    let mut state2 = a ^ salt;
    let b = splitmix64(&mut state2);
    let mut state3 = b ^ index;
    splitmix64(&mut state3)
}

/// A seeded ChaCha stream for `(master, salt, index)`.
pub fn stream(master: u64, salt: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, salt, index))
}

/// A seeded ChaCha stream directly from a seed.
pub fn from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// FNV-1a hash over bytes, for name-derived stream salts and artifact
/// fingerprints.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Standard-normal draw via the Marsaglia polar method.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen_range(-1.0..1.0);
        let v: f64 = rng.gen_range(-1.0..1.0);
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Fisher-Yates shuffle of indices `0..n`.
pub fn shuffled_indices<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}
