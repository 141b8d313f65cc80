//! Counter-based random streams.
//!
//! Every Monte Carlo trial gets its own stream whose key is a pure function of
//! `(master_seed, scenario_id, trial_index)`, so trials can run in any order
//! on any number of threads and still see the same numbers.
//!
//! Stream algorithm (fixed; changing it changes every simulated number):
//!
//! * `mix64` is the SplitMix64 finalizer.
//! * `scenario_key = mix64(master_seed ^ mix64(fnv1a64(scenario_id)))`
//! * `trial_key = mix64(scenario_key ^ mix64(trial_index + 1))`
//! * the k-th 64-bit output (k = 1, 2, ...) is `mix64(trial_key + k * GOLDEN_GAMMA)`,
//!   i.e. a SplitMix64 sequence seeded with `trial_key`.
//! * a uniform draw is `((x >> 11) + 1) * 2^-53`, which lies in `(0, 1]`.

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

const FNV_OFFSET: u64 = 0xCBF2_9CE4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01B3;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn scenario_key(master_seed: u64, scenario_id: &str) -> u64 {
    mix64(master_seed ^ mix64(fnv1a64(scenario_id.as_bytes())))
}

/// A SplitMix64 sequence. Cheap to construct; one per trial.
#[derive(Clone, Debug)]
pub struct Stream {
    state: u64,
    draws: u64,
}

impl Stream {
    pub fn from_key(key: u64) -> Self {
        Stream { state: key, draws: 0 }
    }

    pub fn for_trial(scenario_key: u64, trial: u64) -> Self {
        Stream::from_key(mix64(scenario_key ^ mix64(trial.wrapping_add(1))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        self.draws += 1;
        mix64(self.state)
    }

    /// Uniform on `(0, 1]` with 53 bits of resolution.
    pub fn next_uniform(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.next_u64() >> 11) + 1) as f64 * SCALE
    }

    /// Number of 64-bit values consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }
}
