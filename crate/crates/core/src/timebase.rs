//! Simulation time and per-device local clocks.
//!
//! Time is integer nanoseconds end to end; the synchronizer's tie-breaking
//! must be bit-reproducible, so nothing in the time base goes through floats
//! except the clock's jitter draw (which is rounded back to whole ns).

use core::fmt;
use core::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use num_rational::Ratio;
use num_traits::Zero;

use crate::rng::SimRng;

/// Signed span of time in whole nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Duration {
    ns: i64,
}

impl Duration {
    pub const ZERO: Duration = Duration { ns: 0 };

    pub const fn from_ns(ns: i64) -> Self {
        Self { ns }
    }

    pub const fn from_micros(us: i64) -> Self {
        Self { ns: us * 1_000 }
    }

    pub const fn from_millis(ms: i64) -> Self {
        Self { ns: ms * 1_000_000 }
    }

    pub const fn from_secs(s: i64) -> Self {
        Self { ns: s * 1_000_000_000 }
    }

    pub const fn ns(self) -> i64 {
        self.ns
    }

    pub fn as_secs_f64(self) -> f64 {
        self.ns as f64 * 1e-9
    }

    pub fn abs(self) -> Duration {
        Duration { ns: self.ns.abs() }
    }

    /// Integer multiple (frame counts to spans).
    pub fn scaled(self, factor: i64) -> Duration {
        Duration { ns: self.ns * factor }
    }
}

impl Add for Duration {
    type Output = Duration;
    fn add(self, rhs: Duration) -> Duration {
        Duration { ns: self.ns + rhs.ns }
    }
}

impl AddAssign for Duration {
    fn add_assign(&mut self, rhs: Duration) {
        self.ns += rhs.ns;
    }
}

impl Sub for Duration {
    type Output = Duration;
    fn sub(self, rhs: Duration) -> Duration {
        Duration { ns: self.ns - rhs.ns }
    }
}

impl SubAssign for Duration {
    fn sub_assign(&mut self, rhs: Duration) {
        self.ns -= rhs.ns;
    }
}

impl Neg for Duration {
    type Output = Duration;
    fn neg(self) -> Duration {
        Duration { ns: -self.ns }
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.ns)
    }
}

/// Instant on the true simulation timeline, nanoseconds since the epoch.
/// May be negative for pre-epoch arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TimePoint {
    ns: i64,
}

impl TimePoint {
    pub const EPOCH: TimePoint = TimePoint { ns: 0 };

    pub const fn from_ns(ns: i64) -> Self {
        Self { ns }
    }

    pub const fn ns(self) -> i64 {
        self.ns
    }

    pub fn as_secs_f64(self) -> f64 {
        self.ns as f64 * 1e-9
    }
}

impl Add<Duration> for TimePoint {
    type Output = TimePoint;
    fn add(self, rhs: Duration) -> TimePoint {
        TimePoint { ns: self.ns + rhs.ns() }
    }
}

impl Sub<Duration> for TimePoint {
    type Output = TimePoint;
    fn sub(self, rhs: Duration) -> TimePoint {
        TimePoint { ns: self.ns - rhs.ns() }
    }
}

impl Sub for TimePoint {
    type Output = Duration;
    fn sub(self, rhs: TimePoint) -> Duration {
        Duration::from_ns(self.ns - rhs.ns)
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.ns)
    }
}

/// Clock skew rate in parts per million, kept rational so the skew term stays
/// exact integer arithmetic.
pub type SkewPpm = Ratio<i64>;

/// Affine local clock with optional zero-mean gaussian stamp jitter.
///
/// Reading at true time `t` yields `t + offset + skew_ppm * t / 1e6 + jitter`,
/// with jitter truncated at four standard deviations and rounded to the
/// nearest nanosecond. Fields are immutable after construction except the
/// jitter RNG cursor, which advances on each jittered reading.
#[derive(Debug, Clone)]
pub struct ClockModel {
    offset: Duration,
    skew_ppm: SkewPpm,
    jitter_stddev: Duration,
    rng: SimRng,
}

impl ClockModel {
    pub fn new(offset: Duration, skew_ppm: SkewPpm, jitter_stddev: Duration, seed: u64) -> Self {
        debug_assert!(jitter_stddev >= Duration::ZERO);
        Self {
            offset,
            skew_ppm,
            jitter_stddev,
            rng: SimRng::new(seed),
        }
    }

    /// Identity clock: reads true time exactly.
    pub fn ideal(seed: u64) -> Self {
        Self::new(Duration::ZERO, SkewPpm::zero(), Duration::ZERO, seed)
    }

    pub fn offset(&self) -> Duration {
        self.offset
    }

    pub fn skew_ppm(&self) -> SkewPpm {
        self.skew_ppm
    }

    pub fn jitter_stddev(&self) -> Duration {
        self.jitter_stddev
    }

    /// The device's reading of true time `t`. Advances the jitter cursor when
    /// the clock is jittered.
    pub fn local_time(&mut self, true_time: TimePoint) -> TimePoint {
        let skew_ns = skew_term_ns(true_time.ns(), self.skew_ppm);
        let mut stamped = true_time + self.offset + Duration::from_ns(skew_ns);
        if self.jitter_stddev > Duration::ZERO {
            let z = self.rng.truncated_normal(4.0);
            let jitter = libm::round(z * self.jitter_stddev.ns() as f64) as i64;
            stamped = stamped + Duration::from_ns(jitter);
        }
        stamped
    }

    /// Grandmaster-spoofing / delay-injection model: shifts the clock's
    /// offset and skew without touching any already-stamped packet. The
    /// jitter cursor carries over unchanged.
    pub fn corrupt_sync(&self, injected_offset: Duration, injected_skew_ppm: SkewPpm) -> Self {
        Self {
            offset: self.offset + injected_offset,
            skew_ppm: self.skew_ppm + injected_skew_ppm,
            jitter_stddev: self.jitter_stddev,
            rng: self.rng.clone(),
        }
    }
}

/// Exact skew contribution `t_ns * ppm / 1e6`, rounded half away from zero.
fn skew_term_ns(t_ns: i64, skew_ppm: SkewPpm) -> i64 {
    if skew_ppm.is_zero() {
        return 0;
    }
    let num = t_ns as i128 * *skew_ppm.numer() as i128;
    let den = *skew_ppm.denom() as i128 * 1_000_000;
    div_round_half_away(num, den)
}

fn div_round_half_away(num: i128, den: i128) -> i64 {
    debug_assert!(den > 0);
    let half = den / 2;
    let adjusted = if num >= 0 { num + half } else { num - half };
    (adjusted / den) as i64
}
