//! Keyed, splittable random streams.
//!
//! A [`StreamKey`] is a master seed plus a path of labeled integers
//! (`village`, `strategy`, `run`, `node`, ...). The key is folded into a
//! 256-bit seed with a SplitMix64-style mixer and the stream itself is a
//! ChaCha8 generator, so a stream is a pure function of its key and two
//! workers never share generator state.

use rand::seq::SliceRandom;
use rand::{Error as RandError, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the label bytes; labels are short ASCII tags.
fn hash_label(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hash an arbitrary string (e.g. a village id) into a path value.
pub fn hash_str(s: &str) -> u64 {
    mix64(hash_label(s))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamKey {
    master_seed: u64,
    path: Vec<(String, u64)>,
    state: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        StreamKey {
            master_seed,
            path: Vec::new(),
            state: mix64(master_seed.wrapping_add(GOLDEN)),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[(String, u64)] {
        &self.path
    }

    /// Extend the path by one labeled integer.
    pub fn with(&self, label: &str, value: u64) -> Self {
        let mut next = self.clone();
        next.push(label, value);
        next
    }

    /// Extend the path by a labeled string value (hashed).
    pub fn with_str(&self, label: &str, value: &str) -> Self {
        self.with(label, hash_str(value))
    }

    pub fn push(&mut self, label: &str, value: u64) {
        let s = mix64(self.state ^ hash_label(label).wrapping_mul(GOLDEN));
        self.state = mix64(s.wrapping_add(value).wrapping_add(GOLDEN));
        self.path.push((label.to_string(), value));
    }

    /// A 64-bit seed summarizing this key, for APIs that take a plain seed.
    pub fn seed(&self) -> u64 {
        mix64(self.state ^ 0xA076_1D64_78BD_642F)
    }

    pub fn stream(&self) -> Stream {
        derive_stream(self)
    }
}

/// Build the random stream for `key`.
pub fn derive_stream(key: &StreamKey) -> Stream {
    let mut seed = [0u8; 32];
    let mut s = key.state;
    for chunk in seed.chunks_exact_mut(8) {
        s = s.wrapping_add(GOLDEN);
        chunk.copy_from_slice(&mix64(s).to_le_bytes());
    }
    Stream(ChaCha8Rng::from_seed(seed))
}

/// Shorthand for the stream of `StreamKey::new(seed)`.
pub fn stream_from_seed(seed: u64) -> Stream {
    StreamKey::new(seed).stream()
}

#[derive(Debug, Clone)]
pub struct Stream(ChaCha8Rng);

impl Stream {
    pub fn uniform(&mut self) -> f64 {
        self.0.gen::<f64>()
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        self.0.gen_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.0);
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), RandError> {
        self.0.try_fill_bytes(dest)
    }
}
