//! Packet generation and delivery: periodic capture, timestamping through a
//! device clock, and latency channels between sensor and fusion node.

use alloc::vec::Vec;
use core::fmt;

use crate::rng::SimRng;
use crate::timebase::{ClockModel, Duration, TimePoint};

/// Sensor modality of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    Camera,
    Lidar,
    Other,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Camera => "camera",
            Modality::Lidar => "lidar",
            Modality::Other => "other",
        })
    }
}

/// Identity of one sensor stream within a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StreamId {
    pub index: u32,
    pub modality: Modality,
}

/// Handle to rendered sensor content: the frame index whose capture produced
/// the payload. Content is resolved against the scenario's snapshot store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SnapshotKey {
    pub frame: u64,
}

/// One timestamped sensor message.
///
/// `t_act` is when the content was really captured; `t_pre` is the timestamp
/// the message carries. They agree on benign packets. `forged` is simulation
/// bookkeeping only; the synchronizer never reads it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SensorPacket {
    pub stream: StreamId,
    pub seq: u64,
    pub t_act: TimePoint,
    pub t_pre: TimePoint,
    pub payload: SnapshotKey,
    pub forged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PipelineError {
    /// Capture period must be strictly positive.
    NonPositivePeriod,
    /// Phase must satisfy `0 <= phase < period`.
    PhaseOutOfRange,
    /// A packet cannot be sent before its content was captured.
    SendBeforeCapture { t_send: TimePoint, t_act: TimePoint },
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::NonPositivePeriod => write!(f, "capture period must be > 0"),
            PipelineError::PhaseOutOfRange => write!(f, "phase must be in [0, period)"),
            PipelineError::SendBeforeCapture { t_send, t_act } => {
                write!(f, "send time {t_send} precedes capture time {t_act}")
            }
        }
    }
}

/// Capture instants `{phase, phase+period, ...}` up to and including
/// `horizon`.
pub fn capture_schedule(
    period: Duration,
    phase: Duration,
    horizon: Duration,
) -> Result<Vec<TimePoint>, PipelineError> {
    if period <= Duration::ZERO {
        return Err(PipelineError::NonPositivePeriod);
    }
    if phase < Duration::ZERO || phase >= period {
        return Err(PipelineError::PhaseOutOfRange);
    }
    let mut out = Vec::new();
    if horizon < phase {
        return Ok(out);
    }
    let count = (horizon - phase).ns() / period.ns() + 1;
    out.reserve(count as usize);
    for i in 0..count {
        out.push(TimePoint::EPOCH + phase + period.scaled(i));
    }
    Ok(out)
}

/// Stamp content captured at `t_act` through the device clock and wrap it as
/// a benign packet.
pub fn stamp_and_publish(
    stream: StreamId,
    seq: u64,
    t_act: TimePoint,
    clock: &mut ClockModel,
    payload: SnapshotKey,
) -> SensorPacket {
    SensorPacket {
        stream,
        seq,
        t_act,
        t_pre: clock.local_time(t_act),
        payload,
        forged: false,
    }
}

/// Latency channel between a sensor and the fusion node.
///
/// Delivery latency is `base_latency` plus a zero-mean gaussian jitter term
/// (truncated at four sigma), with the total clamped at zero so latency is
/// never negative. With `allow_reorder` off, arrivals are additionally
/// clamped to land strictly after the previous arrival on the channel.
#[derive(Debug, Clone)]
pub struct Channel {
    base_latency: Duration,
    jitter_stddev: Duration,
    allow_reorder: bool,
    rng: SimRng,
    last_arrival: Option<TimePoint>,
}

impl Channel {
    pub fn new(base_latency: Duration, jitter_stddev: Duration, allow_reorder: bool, seed: u64) -> Self {
        debug_assert!(base_latency >= Duration::ZERO);
        debug_assert!(jitter_stddev >= Duration::ZERO);
        Self {
            base_latency,
            jitter_stddev,
            allow_reorder,
            rng: SimRng::new(seed),
            last_arrival: None,
        }
    }

    /// Ideal wire: zero latency, zero jitter, order-preserving.
    pub fn ideal(seed: u64) -> Self {
        Self::new(Duration::ZERO, Duration::ZERO, false, seed)
    }

    pub fn base_latency(&self) -> Duration {
        self.base_latency
    }

    /// Send `packet` at `t_send`; returns the arrival instant at the fusion
    /// node and advances the channel's jitter cursor.
    pub fn transmit(&mut self, packet: &SensorPacket, t_send: TimePoint) -> Result<TimePoint, PipelineError> {
        if t_send < packet.t_act {
            return Err(PipelineError::SendBeforeCapture { t_send, t_act: packet.t_act });
        }
        let mut latency_ns = self.base_latency.ns();
        if self.jitter_stddev > Duration::ZERO {
            let z = self.rng.truncated_normal(4.0);
            latency_ns += libm::round(z * self.jitter_stddev.ns() as f64) as i64;
        }
        let mut arrival = t_send + Duration::from_ns(latency_ns.max(0));
        if !self.allow_reorder {
            if let Some(prev) = self.last_arrival {
                if arrival <= prev {
                    arrival = prev + Duration::from_ns(1);
                }
            }
        }
        self.last_arrival = Some(arrival);
        Ok(arrival)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timebase::SkewPpm;
    use num_traits::Zero;

    fn stream() -> StreamId {
        StreamId { index: 0, modality: Modality::Lidar }
    }

    fn packet_at(t: TimePoint) -> SensorPacket {
        SensorPacket {
            stream: stream(),
            seq: 0,
            t_act: t,
            t_pre: t,
            payload: SnapshotKey { frame: 0 },
            forged: false,
        }
    }

    #[test]
    fn schedule_is_an_arithmetic_sequence() {
        let s = capture_schedule(Duration::from_secs(1), Duration::ZERO, Duration::from_secs(5)).unwrap();
        let expect: Vec<i64> = (0..=5).map(|i| i * 1_000_000_000).collect();
        assert_eq!(s.iter().map(|t| t.ns()).collect::<Vec<_>>(), expect);
    }

    #[test]
    fn schedule_with_phase() {
        let s =
            capture_schedule(Duration::from_millis(100), Duration::from_millis(50), Duration::from_millis(250))
                .unwrap();
        assert_eq!(
            s.iter().map(|t| t.ns()).collect::<Vec<_>>(),
            alloc::vec![50_000_000, 150_000_000, 250_000_000]
        );
    }

    #[test]
    fn ten_hertz_over_one_second_is_eleven_frames() {
        let s = capture_schedule(Duration::from_millis(100), Duration::ZERO, Duration::from_secs(1)).unwrap();
        assert_eq!(s.len(), 11);
    }

    #[test]
    fn schedule_rejects_bad_period_and_phase() {
        assert_eq!(
            capture_schedule(Duration::ZERO, Duration::ZERO, Duration::from_secs(1)),
            Err(PipelineError::NonPositivePeriod)
        );
        assert_eq!(
            capture_schedule(Duration::from_millis(10), Duration::from_millis(10), Duration::from_secs(1)),
            Err(PipelineError::PhaseOutOfRange)
        );
    }

    #[test]
    fn stamping_through_identity_and_offset_clocks() {
        let mut ideal = ClockModel::ideal(0);
        let p = stamp_and_publish(stream(), 2, TimePoint::from_ns(2_000_000_000), &mut ideal, SnapshotKey { frame: 2 });
        assert_eq!(p.t_pre, p.t_act);
        assert!(!p.forged);

        let mut ahead = ClockModel::new(Duration::from_secs(5), SkewPpm::zero(), Duration::ZERO, 0);
        let p = stamp_and_publish(stream(), 2, TimePoint::from_ns(2_000_000_000), &mut ahead, SnapshotKey { frame: 2 });
        assert_eq!(p.t_pre, TimePoint::from_ns(7_000_000_000));
    }

    #[test]
    fn stamping_with_skew() {
        let mut skewed = ClockModel::new(Duration::ZERO, SkewPpm::from_integer(100), Duration::ZERO, 0);
        let p = stamp_and_publish(stream(), 0, TimePoint::from_ns(10_000_000_000), &mut skewed, SnapshotKey { frame: 0 });
        assert_eq!(p.t_pre.ns(), 10_001_000_000);
    }

    #[test]
    fn ideal_channel_delivers_at_send_time() {
        let mut ch = Channel::ideal(0);
        let arr = ch.transmit(&packet_at(TimePoint::from_ns(5)), TimePoint::from_ns(5)).unwrap();
        assert_eq!(arr, TimePoint::from_ns(5));
    }

    #[test]
    fn base_latency_adds_up() {
        let mut ch = Channel::new(Duration::from_millis(2), Duration::ZERO, false, 0);
        let arr = ch
            .transmit(&packet_at(TimePoint::from_ns(1_000_000_000)), TimePoint::from_ns(1_000_000_000))
            .unwrap();
        assert_eq!(arr, TimePoint::from_ns(1_002_000_000));
    }

    #[test]
    fn cannot_send_before_capture() {
        let mut ch = Channel::ideal(0);
        let p = packet_at(TimePoint::from_ns(100));
        assert!(ch.transmit(&p, TimePoint::from_ns(99)).is_err());
    }

    #[test]
    fn no_reorder_clamps_to_strictly_increasing_arrivals() {
        let mut ch = Channel::new(Duration::ZERO, Duration::from_millis(5), false, 9);
        let mut prev = None;
        for i in 0..2_000 {
            let t = TimePoint::from_ns(i * 1_000_000);
            let arr = ch.transmit(&packet_at(t), t).unwrap();
            if let Some(p) = prev {
                assert!(arr > p);
            }
            prev = Some(arr);
        }
    }

    #[test]
    fn jitterless_channel_preserves_send_order() {
        let mut ch = Channel::new(Duration::from_millis(3), Duration::ZERO, true, 0);
        let a = ch.transmit(&packet_at(TimePoint::from_ns(0)), TimePoint::from_ns(0)).unwrap();
        let b = ch.transmit(&packet_at(TimePoint::from_ns(10)), TimePoint::from_ns(10)).unwrap();
        assert!(b > a);
    }
}
