//! Deterministic per-component random streams derived from one master seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream tags; every independent noise source in a run owns one.
pub mod tag {
    pub const P_PLUS: u64 = 0x01;
    pub const P_MINUS: u64 = 0x02;
    pub const Q_PLUS: u64 = 0x03;
    pub const Q_MINUS: u64 = 0x04;
    pub const PUMP: u64 = 0x05;
    pub const MZI_SIGNAL_PHASE: u64 = 0x11;
    pub const MZI_IDLER_PHASE: u64 = 0x12;
    pub const MZI_SIGNAL_AMP: u64 = 0x13;
    pub const MZI_IDLER_AMP: u64 = 0x14;
    pub const SNL: u64 = 0x21;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the sub-stream `tag` of `master`.
pub fn sub_seed(master: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(master) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stream(master: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(master, tag))
}

/// Unit-variance Gaussian source.
#[derive(Debug, Clone)]
pub struct GaussianSource {
    rng: ChaCha8Rng,
}

impl GaussianSource {
    pub fn new(master: u64, tag: u64) -> Self {
        Self {
            rng: stream(master, tag),
        }
    }

    pub fn fill(&mut self, buf: &mut [f64]) {
        for v in buf {
            *v = self.rng.sample(StandardNormal);
        }
    }
}
