//! Seeded randomness with bit-reproducible output across platforms.
//!
//! Two access patterns are used throughout the crate:
//!
//! * sequential draws from a [`SimRng`] cursor (clock jitter, channel jitter),
//! * counter-based draws keyed by `(seed, stream, frame)` via [`mix64`] /
//!   [`hash64`], so a value can be recomputed without replaying a sequence.
//!
//! Transcendentals go through `libm` soft-float implementations rather than
//! the platform math library, so the same seed yields the same bits on every
//! host. Not cryptographic; never use for secrets.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer: a well-mixed bijection on `u64`.
#[inline]
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a seed plus a sequence of words.
///
/// Used for per-stream seed derivation, counter-based delay draws, and sweep
/// cell seeds. Order-sensitive.
pub fn hash64(seed: u64, parts: &[u64]) -> u64 {
    let mut h = mix64(seed);
    for &p in parts {
        h = mix64(h ^ p.wrapping_mul(GOLDEN_GAMMA));
    }
    h
}

/// Deterministic sequential RNG (splitmix64 stream).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimRng {
    state: u64,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state.wrapping_sub(GOLDEN_GAMMA))
    }

    /// Uniform integer on `0..=max`. Modulo reduction; the bias is below
    /// 2^-57 for the frame-count ranges used here.
    #[inline]
    pub fn uniform_inclusive(&mut self, max: u64) -> u64 {
        self.next_u64() % (max + 1)
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    #[inline]
    pub fn next_f64_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal deviate (Box-Muller, cosine branch).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.next_f64_open01();
        let u2 = self.next_f64_open01();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    /// Standard normal conditioned on |z| <= `max_sigma` (rejection).
    pub fn truncated_normal(&mut self, max_sigma: f64) -> f64 {
        loop {
            let z = self.standard_normal();
            if libm::fabs(z) <= max_sigma {
                return z;
            }
        }
    }
}
