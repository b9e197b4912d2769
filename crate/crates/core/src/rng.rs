//! Explicitly split random streams.
//!
//! Every random draw in a simulation comes from a ChaCha stream keyed by a
//! base seed and selected by a path of labels (replication, purpose, arm,
//! ...). Two different paths never share a stream, so generation order across
//! arms, policies or worker threads has no effect on the values drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose labels used as the second path element by the simulators.
pub mod label {
    pub const PARAMS: u64 = 1;
    pub const OFFLINE: u64 = 2;
    pub const CONTEXT: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const POLICY: u64 = 5;
    pub const CROSS_VALIDATION: u64 = 6;
    pub const PATIENTS: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a label path into a single 64-bit stream id.
pub fn stream_id(path: &[u64]) -> u64 {
    path.iter()
        .fold(0x243f_6a88_85a3_08d3, |h, &v| splitmix64(h ^ splitmix64(v)))
}

/// Returns the stream selected by `path` under `seed`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(path));
    rng
}

/// Hashes a string label (e.g. a policy name) into a path element.
pub fn label_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    })
}
