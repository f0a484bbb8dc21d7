//! Named, seedable random streams.
//!
//! Every random decision in the pipeline draws from a ChaCha8 stream keyed by
//! the run seed and selected by a `(Stream, ids...)` tuple. Streams are
//! independent of each other and of the order in which they are consumed, so
//! parallel and sequential execution replay identically.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags for stream derivation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Graph = 1,
    Permutation = 2,
    Label = 3,
    Family = 4,
    Pack = 5,
    Round = 6,
    Trial = 7,
    Sample = 8,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn stream_id(stream: Stream, ids: &[u64]) -> u64 {
    let mut h = splitmix64(stream as u64);
    for &id in ids {
        h = splitmix64(h ^ splitmix64(id));
    }
    h
}

/// A ChaCha8 generator for `seed`, positioned on the stream selected by
/// `(stream, ids)`.
pub fn stream_rng(seed: u64, stream: Stream, ids: &[u64]) -> StreamRng {
    let mut key = [0u8; 32];
    let mut s = seed;
    for chunk in key.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream_id(stream, ids));
    rng
}

/// Derive a child seed, e.g. one per peeling round.
pub fn derive_seed(seed: u64, stream: Stream, ids: &[u64]) -> u64 {
    splitmix64(seed ^ stream_id(stream, ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_stream_replays() {
        let a: Vec<u64> = (0..8)
            .map({
                let mut r = stream_rng(42, Stream::Label, &[3, 9]);
                move |_| r.gen()
            })
            .collect();
        let mut r = stream_rng(42, Stream::Label, &[3, 9]);
        let b: Vec<u64> = (0..8).map(|_| r.gen()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn streams_differ() {
        let x: u64 = stream_rng(42, Stream::Label, &[3]).gen();
        let y: u64 = stream_rng(42, Stream::Label, &[4]).gen();
        let z: u64 = stream_rng(42, Stream::Permutation, &[3]).gen();
        let w: u64 = stream_rng(43, Stream::Label, &[3]).gen();
        assert_ne!(x, y);
        assert_ne!(x, z);
        assert_ne!(x, w);
    }
}
