//! Independent random substreams derived from one master seed.
//!
//! Each replication draws street seeds, relays and users from separate
//! streams so that changing, say, the user intensity leaves the street
//! system of a replication untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Labels occupy the top byte so `label ^ replication` never collides for
/// replication indices below 2^56.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Points = 0x01 << 56,
    Relays = 0x02 << 56,
    Users = 0x03 << 56,
}

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn substream_seed(master: u64, stream: Stream, replication: u64) -> u64 {
    mix64(master ^ stream as u64 ^ replication)
}

pub fn stream_rng(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seeds for every stream of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicationSeeds {
    pub points: u64,
    pub relays: u64,
    pub users: u64,
}

impl ReplicationSeeds {
    pub fn new(master: u64, replication: u64) -> Self {
        Self {
            points: substream_seed(master, Stream::Points, replication),
            relays: substream_seed(master, Stream::Relays, replication),
            users: substream_seed(master, Stream::Users, replication),
        }
    }
}
