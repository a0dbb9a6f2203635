//! Seeded, independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream `stream` of the generator keyed by `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
