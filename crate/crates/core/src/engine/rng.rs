use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// The `counter`-th 64-bit draw of the stream for `seed`. Random access, so
/// a run resumed from a snapshot continues the same sequence.
pub fn draw(seed: u64, counter: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(u128::from(counter) * 2);
    rng.next_u64()
}
