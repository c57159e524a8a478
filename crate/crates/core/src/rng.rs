//! Counter-derived random streams.
//!
//! Every random quantity in the crate is drawn from a [`SeedStream`], a pair
//! `(master seed, stream id)`. Child streams are derived by hashing the parent
//! id together with a component tag and an index, so the stream of sample `m`
//! of MPC bin `k` is fixed by the master seed alone and does not depend on the
//! order in which work items are scheduled:
//!
//! ```text
//! child(tag, index).id = splitmix(splitmix(parent.id ^ splitmix(tag)) ^ index)
//! rng seed             = splitmix(master ^ splitmix(id))
//! ```

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

/// Component tags used when deriving child streams.
pub mod tag {
    pub const EVENTS: u64 = 0x45564e54;
    pub const NOISE: u64 = 0x4e4f4953;
    pub const SAMPLE: u64 = 0x53414d50;
    pub const EXECUTE: u64 = 0x45584543;
    pub const CROSS_ENTROPY: u64 = 0x43454d31;
    pub const FINITE_DIFF: u64 = 0x46443031;
    pub const ROLLOUT: u64 = 0x524f4c4c;
    pub const NETWORK: u64 = 0x4e455457;
    pub const BASELINE: u64 = 0x42415345;
    pub const DATA: u64 = 0x44415441;
    pub const RANDOM_METHOD: u64 = 0x524e444d;
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    master: u64,
    id: u64,
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        Self { master, id: 0 }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn child(&self, tag: u64, index: u64) -> Self {
        Self {
            master: self.master,
            id: splitmix(splitmix(self.id ^ splitmix(tag)) ^ index),
        }
    }

    /// Shorthand for `child(tag, 0)`.
    pub fn sub(&self, tag: u64) -> Self {
        self.child(tag, 0)
    }

    pub fn rng(&self) -> StreamRng {
        StreamRng::seed_from_u64(splitmix(self.master ^ splitmix(self.id)))
    }
}
