//! Every stochastic choice derives from one run seed via independent ChaCha streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const INIT_STREAM: u64 = 0;

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream used to shuffle examples in `epoch`.
pub fn shuffle_stream(epoch: usize) -> u64 {
    1 + 2 * epoch as u64
}

/// Stream used for dropout masks in `epoch`.
pub fn dropout_stream(epoch: usize) -> u64 {
    2 + 2 * epoch as u64
}
