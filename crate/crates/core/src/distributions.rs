//! Seeded reward generation.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed (little-endian
//! in the first eight key bytes, remaining key bytes zero) and positioned on a
//! 64-bit ChaCha stream id. Replication `r` of base seed `s` uses key `s` and
//! stream id `r`, so distinct `(s, r)` pairs never share a keystream.
//! Stream ids with the top bit set are reserved for instance generation
//! (random means in presets).
//!
//! Raw 64-bit outputs consumed per draw:
//!
//! | kind          | outputs | method                                   |
//! |---------------|---------|------------------------------------------|
//! | deterministic | 0       | point mass                               |
//! | bernoulli     | 1       | `u < p`                                  |
//! | categorical   | 1       | inverse CDF over the listed support      |
//! | beta          | 1       | inverse regularized incomplete beta      |
//! | gaussian      | 2       | Box-Muller, cosine branch only           |
//!
//! Uniforms are `((x >> 11) + 0.5) / 2^53`, which lies strictly inside (0, 1).
//! Gaussian draws are not clamped.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::RewardDist;

const INSTANCE_STREAM_BIT: u64 = 1 << 63;

/// A reproducible random stream owned by one replication.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::keyed(seed, 0)
    }

    fn keyed(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0, 1); one raw output.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

/// Stream for replication `replication` of `base_seed`.
///
/// # Panics
/// If `replication` has its top bit set (reserved range).
pub fn derive_stream(base_seed: u64, replication: u64) -> RngStream {
    assert!(
        replication & INSTANCE_STREAM_BIT == 0,
        "replication index {replication} is in the reserved range"
    );
    RngStream::keyed(base_seed, replication)
}

/// Stream used to generate random instance parameters (e.g. preset means).
pub fn instance_stream(base_seed: u64, index: u64) -> RngStream {
    RngStream::keyed(
        base_seed,
        INSTANCE_STREAM_BIT | (index & !INSTANCE_STREAM_BIT),
    )
}

/// One draw from `dist`. The distribution must already be validated.
pub fn sample(dist: &RewardDist, rng: &mut RngStream) -> f64 {
    match dist {
        RewardDist::Deterministic { value } => *value,
        RewardDist::Bernoulli { p } => {
            if rng.uniform() < *p {
                1.0
            } else {
                0.0
            }
        }
        RewardDist::Categorical { values, probs } => {
            let u = rng.uniform();
            let mut acc = 0.0;
            for (v, p) in values.iter().zip(probs) {
                acc += p;
                if u < acc {
                    return *v;
                }
            }
            // rounding left u above the accumulated total: last supported value
            values
                .iter()
                .zip(probs)
                .rev()
                .find(|(_, p)| **p > 0.0)
                .map(|(v, _)| *v)
                .unwrap_or(values[values.len() - 1])
        }
        RewardDist::Beta { alpha, beta } => {
            let u = rng.uniform();
            statrs::function::beta::inv_beta_reg(*alpha, *beta, u)
        }
        RewardDist::Gaussian { mean, variance } => {
            let u1 = rng.uniform();
            let u2 = rng.uniform();
            let radius = (-2.0 * u1.ln()).sqrt();
            mean + variance.sqrt() * radius * (std::f64::consts::TAU * u2).cos()
        }
    }
}

/// Number of raw generator outputs one call to [`sample`] consumes.
pub fn draws_per_sample(dist: &RewardDist) -> usize {
    match dist {
        RewardDist::Deterministic { .. } => 0,
        RewardDist::Bernoulli { .. } | RewardDist::Categorical { .. } | RewardDist::Beta { .. } => {
            1
        }
        RewardDist::Gaussian { .. } => 2,
    }
}
