//! Counter-based keyed randomness.
//!
//! Every random quantity in the crate is a pure function of a seed and a key
//! (a short sequence of 64-bit words naming the object being sampled). There
//! is no generator state, so an edge can be sampled lazily, in any order, from
//! any thread, and always gets the same value.
//!
//! The construction is fixed and must stay bit-stable:
//!
//! ```text
//! h0     = seed
//! h_{i+1} = mix64((h_i ^ w_i) + 0x9E3779B97F4A7C15)     (wrapping add)
//! u      = (mix64(h_n + 0x9E3779B97F4A7C15) >> 11) / 2^53
//! ```
//!
//! where `mix64` is the SplitMix64 finalizer and `w_i` are the key words
//! (signed integers are reinterpreted as `u64`).

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Incremental keyed hash over 64-bit words.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyHasher {
    state: u64,
}

impl KeyHasher {
    #[inline(always)]
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline(always)]
    pub fn absorb(mut self, word: u64) -> Self {
        self.state = mix64((self.state ^ word).wrapping_add(GOLDEN_GAMMA));
        self
    }

    #[inline(always)]
    pub fn absorb_i64(self, word: i64) -> Self {
        self.absorb(word as u64)
    }

    #[inline(always)]
    pub fn absorb_all(self, words: &[i64]) -> Self {
        words.iter().fold(self, |h, &w| h.absorb_i64(w))
    }

    #[inline(always)]
    pub fn finish(self) -> u64 {
        mix64(self.state.wrapping_add(GOLDEN_GAMMA))
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline(always)]
    pub fn uniform(self) -> f64 {
        to_unit(self.finish())
    }
}

#[inline(always)]
pub fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seed of replica `index` derived from a base seed.
pub fn replica_seed(seed0: u64, index: u64) -> u64 {
    KeyHasher::new(seed0).absorb(index).finish()
}

/// Domain tags keep the key spaces of different models apart.
pub mod tag {
    pub const ANISO_VERTICAL: u64 = 0x5645_5254; // "VERT"
    pub const ANISO_HORIZONTAL: u64 = 0x484F_5249; // "HORI"
    pub const DEATH: u64 = 0x4445_4154; // "DEAT"
    pub const BIRTH: u64 = 0x4249_5254; // "BIRT"
    pub const SABOTAGE: u64 = 0x5341_424F; // "SABO"
    pub const COMPARISON: u64 = 0x434F_4D50; // "COMP"
    pub const INDEPENDENT: u64 = 0x494E_4445; // "INDE"
}

/// Unit-rate-free exponential gap stream for one Poisson process.
///
/// Event `m` of the process keyed by `key` sits at
/// `sum_{l<=m} -ln(1 - u_l) / rate` where `u_l` is the keyed uniform of
/// `(key, l)`.
#[derive(Clone, Debug)]
pub struct PoissonStream {
    key: KeyHasher,
    rate: f64,
    index: u64,
    time: f64,
}

impl PoissonStream {
    pub fn new(key: KeyHasher, rate: f64) -> Self {
        Self {
            key,
            rate,
            index: 0,
            time: 0.0,
        }
    }
}

impl Iterator for PoissonStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if !(self.rate > 0.0) {
            return None;
        }
        let u = self.key.absorb(self.index).uniform();
        self.index += 1;
        self.time += -(-u).ln_1p() / self.rate;
        Some(self.time)
    }
}

/// All event times of the process in `[0, horizon]`.
pub fn poisson_events(key: KeyHasher, rate: f64, horizon: f64) -> Vec<f64> {
    PoissonStream::new(key, rate)
        .take_while(|&t| t <= horizon)
        .collect()
}
