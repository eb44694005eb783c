//! Channel and stamping properties, including the Monte-Carlo latency check
//! against an independent quadrature oracle.

use misalign_core::pipeline::{
    capture_schedule, stamp_and_publish, Channel, Modality, SensorPacket, SnapshotKey, StreamId,
};
use misalign_core::timebase::{ClockModel, Duration, TimePoint};

fn packet_at(t: TimePoint) -> SensorPacket {
    SensorPacket {
        stream: StreamId { index: 0, modality: Modality::Lidar },
        seq: 0,
        t_act: t,
        t_pre: t,
        payload: SnapshotKey { frame: 0 },
        forged: false,
    }
}

/// E[max(0, base + sigma * Z)] for Z standard normal truncated at +/-4,
/// by Simpson quadrature. Independent of the channel's sampling path.
fn expected_clipped_latency_ns(base_ns: f64, sigma_ns: f64) -> f64 {
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let integrand =
        |z: f64| (base_ns + sigma_ns * z).max(0.0) * phi(z);
    let simpson = |f: &dyn Fn(f64) -> f64| {
        let n = 4000;
        let (a, b) = (-4.0f64, 4.0f64);
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    };
    simpson(&integrand) / simpson(&phi)
}

#[test]
fn channel_latency_mean_matches_quadrature_oracle() {
    let base = Duration::from_millis(2);
    let sigma = Duration::from_millis(1);
    let mut channel = Channel::new(base, sigma, true, 424242);
    let n = 10_000;
    let mut total_ns = 0i64;
    for i in 0..n {
        let t = TimePoint::from_ns(i * 100_000_000);
        let arrival = channel.transmit(&packet_at(t), t).unwrap();
        total_ns += (arrival - t).ns();
    }
    let empirical = total_ns as f64 / n as f64;
    let oracle = expected_clipped_latency_ns(2e6, 1e6);
    assert!(
        (empirical - oracle).abs() < 100_000.0,
        "empirical {empirical} ns vs oracle {oracle} ns"
    );
    // The clip at zero barely moves the mean off the base latency here.
    assert!((empirical - 2e6).abs() < 100_000.0, "empirical {empirical} ns");
}

#[test]
fn benign_end_to_end_identity() {
    // Ideal clock plus a fixed-latency channel: every packet arrives with
    // t_pre = t_act = arrival - base_latency.
    let stream = StreamId { index: 0, modality: Modality::Camera };
    let base = Duration::from_millis(2);
    let mut clock = ClockModel::ideal(1);
    let mut channel = Channel::new(base, Duration::ZERO, false, 2);
    let schedule =
        capture_schedule(Duration::from_millis(100), Duration::ZERO, Duration::from_secs(5)).unwrap();
    let mut prev_t_act: Option<TimePoint> = None;
    for (seq, t_act) in schedule.into_iter().enumerate() {
        let p = stamp_and_publish(stream, seq as u64, t_act, &mut clock, SnapshotKey { frame: seq as u64 });
        assert_eq!(p.t_pre, p.t_act);
        let arrival = channel.transmit(&p, t_act).unwrap();
        assert_eq!(arrival - base, p.t_act);
        if let Some(prev) = prev_t_act {
            assert!(p.t_act > prev);
        }
        prev_t_act = Some(p.t_act);
    }
}

#[test]
fn reordering_channel_still_never_beats_capture() {
    let mut channel = Channel::new(Duration::from_millis(1), Duration::from_millis(3), true, 77);
    for i in 0..5_000 {
        let t = TimePoint::from_ns(i * 10_000_000);
        let arrival = channel.transmit(&packet_at(t), t).unwrap();
        assert!(arrival >= t, "latency went negative");
    }
}
