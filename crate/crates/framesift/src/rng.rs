//! Fixed, portable pseudo-random primitives.
//!
//! The random baseline and the mock scorer must produce bit-identical output
//! on every platform, so they use generators pinned here by their constants
//! instead of a library default that may change between releases.
//!
//! `SplitMix64` (Steele, Lea & Flood 2014):
//!   state += 0x9e3779b97f4a7c15
//!   z = state; z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9;
//!   z = (z ^ (z >> 27)) * 0x94d049bb133111eb; return z ^ (z >> 31)
//!
//! `fnv1a64`: offset basis 0xcbf29ce484222325, prime 0x100000001b3.

/// SplitMix64 generator. Same seed, same stream, on every platform.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform draw from `[0, bound)` by modulo reduction.
    ///
    /// The modulo bias is below 2^-32 for any bound that fits in 32 bits,
    /// which covers every frame count this crate handles.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        self.next_u64() % bound
    }
}

/// FNV-1a over a byte string, 64-bit variant.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// One SplitMix64 scramble step, used to mix a seed with a hash.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
