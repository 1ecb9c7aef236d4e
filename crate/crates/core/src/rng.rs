//! Counter-based random streams.
//!
//! Every draw is addressed by `(master, replicate, step, site, lane)`, so the
//! outcome of a simulation does not depend on iteration order or on how
//! replicates are scheduled across threads.

use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

/// Lanes separate independent uses of the same `(replicate, step, site)`.
pub mod lane {
    pub const OFFSPRING: u64 = 1;
    pub const PLACEMENT: u64 = 2;
    pub const LABELS: u64 = 3;
    pub const KAPPA: u64 = 4;
    pub const TIE_BREAK: u64 = 5;
    pub const INITIAL: u64 = 6;
    pub const AUX: u64 = 7;
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a stream address into a 64-bit seed.
#[inline]
pub fn stream_key(master: u64, replicate: u64, step: u64, site: u64, lane: u64) -> u64 {
    let mut h = mix(master ^ 0x9e37_79b9_7f4a_7c15);
    h = mix(h ^ replicate.wrapping_mul(0xd1b5_4a32_d192_ed03));
    h = mix(h ^ step.wrapping_mul(0x8cb9_2ba7_2f3d_8dd7));
    h = mix(h ^ site);
    mix(h ^ lane.wrapping_mul(0xa24b_aed4_963e_e407))
}

/// A generator for one stream address.
#[inline]
pub fn stream(master: u64, replicate: u64, step: u64, site: u64, lane: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(stream_key(master, replicate, step, site, lane))
}

/// Seed of one replicate: the address of a replicate-level stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamSeed {
    pub master: u64,
    pub replicate: u64,
}

impl StreamSeed {
    pub fn new(master: u64, replicate: u64) -> StreamSeed {
        StreamSeed { master, replicate }
    }

    #[inline]
    pub fn at(&self, step: u64, site: u64, lane: u64) -> SplitMix64 {
        stream(self.master, self.replicate, step, site, lane)
    }

    /// A derived seed for an independent sub-experiment.
    pub fn fork(&self, tag: u64) -> StreamSeed {
        StreamSeed {
            master: stream_key(self.master, self.replicate, u64::MAX, tag, lane::AUX),
            replicate: self.replicate,
        }
    }
}
