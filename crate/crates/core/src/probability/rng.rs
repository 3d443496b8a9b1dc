use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Seeded ChaCha20 stream. The same `(seed, stream)` pair yields the same
/// draws on every platform.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Jump to an absolute word position.
    pub fn set_counter(&mut self, pos: u128) {
        self.inner.set_word_pos(pos);
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
