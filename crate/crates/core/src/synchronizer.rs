//! Timestamp-based alignment of sensor streams.
//!
//! The matcher trusts timestamps: its decisions are a function of
//! `(t_pre, seq, arrival order)` only. Payload and true capture time never
//! enter the selection. That trust is exactly what timestamp-forging and
//! replay attacks exploit.
//!
//! Matching rule, applied to quiescence after every arrival: a candidate is
//! one queued packet per stream such that every member's `t_pre` strictly
//! exceeds the stream's last emitted `t_pre` and the stamp spread is within
//! the slop window. Among candidates the matcher emits the one minimizing
//! spread, then pivot (the max stamp), then the stream-ordered sequence
//! vector lexicographically. After emission, queued packets at or below the
//! emitted stamp of their stream are discarded.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::pipeline::SensorPacket;
use crate::timebase::{Duration, TimePoint};

/// Strict or tolerance-window matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncMode {
    Exact,
    Approximate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncPolicy {
    pub mode: SyncMode,
    /// Tolerance window for approximate mode; ignored (treated as zero) in
    /// exact mode.
    pub slop: Duration,
    /// Bounded per-stream buffering; the oldest packet is evicted on
    /// overflow.
    pub queue_size: usize,
}

impl SyncPolicy {
    pub fn effective_slop(&self) -> Duration {
        match self.mode {
            SyncMode::Exact => Duration::ZERO,
            SyncMode::Approximate => self.slop,
        }
    }
}

/// Nominal frame grid of one stream, used to express how stale a tuple
/// member's content is in whole frames. Never consulted by the matcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamTiming {
    pub period: Duration,
    pub phase: Duration,
}

impl StreamTiming {
    /// Index of the frame whose nominal capture time is nearest `t`
    /// (clamped at frame 0).
    pub fn nearest_frame(&self, t: TimePoint) -> i64 {
        let rel = t.ns() - self.phase.ns();
        let per = self.period.ns();
        let idx = (rel + per / 2).div_euclid(per);
        idx.max(0)
    }
}

/// One emitted alignment: exactly one packet per stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedTuple {
    /// True time of emission (arrival of the packet that completed the
    /// match).
    pub t_sys: TimePoint,
    /// Largest member stamp.
    pub pivot: TimePoint,
    /// Largest minus smallest member stamp.
    pub spread: Duration,
    /// Selected packets, indexed by stream.
    pub members: Vec<SensorPacket>,
    /// Per stream: content frame index minus the frame index nearest
    /// `t_sys`. Zero means the member carries fresh content.
    pub content_offsets: Vec<i64>,
}

/// Anomalies surfaced to the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncNote {
    DuplicateDropped { stream: u32, seq: u64, t_pre: TimePoint },
    Evicted { stream: u32, seq: u64, t_pre: TimePoint },
}

#[derive(Debug, Clone, Default)]
pub struct PushOutput {
    pub tuples: Vec<AlignedTuple>,
    pub notes: Vec<SyncNote>,
}

/// Matcher state: bounded per-stream queues plus the per-stream emission
/// floor (last emitted stamp).
#[derive(Debug, Clone)]
pub struct SyncState {
    policy: SyncPolicy,
    timings: Vec<StreamTiming>,
    queues: Vec<VecDeque<SensorPacket>>,
    floors: Vec<Option<TimePoint>>,
}

impl SyncState {
    pub fn new(policy: SyncPolicy, timings: Vec<StreamTiming>) -> Self {
        debug_assert!(policy.queue_size >= 1);
        let n = timings.len();
        Self {
            policy,
            timings,
            queues: (0..n).map(|_| VecDeque::new()).collect(),
            floors: alloc::vec![None; n],
        }
    }

    pub fn stream_count(&self) -> usize {
        self.queues.len()
    }

    pub fn policy(&self) -> SyncPolicy {
        self.policy
    }

    /// Last emitted stamp per stream, if any.
    pub fn floor(&self, stream: usize) -> Option<TimePoint> {
        self.floors[stream]
    }

    /// Empty all queues and clear emission floors.
    pub fn reset(&mut self) {
        for q in &mut self.queues {
            q.clear();
        }
        for f in &mut self.floors {
            *f = None;
        }
    }

    /// Accept one arrival and run the matcher to quiescence.
    pub fn push(&mut self, packet: SensorPacket, arrival: TimePoint) -> PushOutput {
        let mut out = PushOutput::default();
        let idx = packet.stream.index as usize;
        debug_assert!(idx < self.queues.len(), "unknown stream index {idx}");

        if self.queues[idx]
            .iter()
            .any(|q| q.seq == packet.seq && q.t_pre == packet.t_pre)
        {
            out.notes.push(SyncNote::DuplicateDropped {
                stream: packet.stream.index,
                seq: packet.seq,
                t_pre: packet.t_pre,
            });
            return out;
        }

        self.queues[idx].push_back(packet);
        if self.queues[idx].len() > self.policy.queue_size {
            let evicted = self.queues[idx].pop_front().expect("nonempty queue");
            out.notes.push(SyncNote::Evicted {
                stream: evicted.stream.index,
                seq: evicted.seq,
                t_pre: evicted.t_pre,
            });
        }

        while let Some(chosen) = self.best_candidate() {
            out.tuples.push(self.emit(chosen, arrival));
        }
        out
    }

    fn emit(&mut self, members: Vec<SensorPacket>, t_sys: TimePoint) -> AlignedTuple {
        let pivot = members.iter().map(|p| p.t_pre).max().expect("nonempty tuple");
        let low = members.iter().map(|p| p.t_pre).min().expect("nonempty tuple");
        let spread = pivot - low;
        debug_assert!(spread <= self.policy.effective_slop());

        for (i, member) in members.iter().enumerate() {
            debug_assert!(self.floors[i].is_none_or(|f| member.t_pre > f));
            self.floors[i] = Some(member.t_pre);
            let floor = member.t_pre;
            self.queues[i].retain(|p| p.t_pre > floor);
        }

        let content_offsets = members
            .iter()
            .enumerate()
            .map(|(i, p)| p.payload.frame as i64 - self.timings[i].nearest_frame(t_sys))
            .collect();

        AlignedTuple { t_sys, pivot, spread, members, content_offsets }
    }

    /// Find the best emittable candidate, if any.
    ///
    /// Search strategy: the minimal achievable spread is the smallest range
    /// over the merged eligible stamps that covers every stream (sliding
    /// window over the sorted merge); the minimal pivot is then the smallest
    /// stamp value that can sit at the top of such a range; members are
    /// finally chosen stream by stream for the lexicographically smallest
    /// sequence vector that keeps both range endpoints attainable.
    fn best_candidate(&self) -> Option<Vec<SensorPacket>> {
        let m = self.queues.len();
        let slop = self.policy.effective_slop();

        let mut eligible: Vec<Vec<&SensorPacket>> = Vec::with_capacity(m);
        for i in 0..m {
            let floor = self.floors[i];
            let mut v: Vec<&SensorPacket> = self.queues[i]
                .iter()
                .filter(|p| floor.is_none_or(|f| p.t_pre > f))
                .collect();
            if v.is_empty() {
                return None;
            }
            v.sort_by_key(|p| (p.t_pre, p.seq));
            eligible.push(v);
        }

        let mut merged: Vec<(TimePoint, usize)> = Vec::new();
        for (i, v) in eligible.iter().enumerate() {
            for p in v {
                merged.push((p.t_pre, i));
            }
        }
        merged.sort_by_key(|&(t, i)| (t, i));

        let spread = minimal_covering_spread(&merged, m)?;
        if spread > slop {
            return None;
        }

        let pivot = minimal_feasible_pivot(&eligible, &merged, spread).expect("pivot exists for minimal spread");
        let low = pivot - spread;

        let mut chosen: Vec<SensorPacket> = Vec::with_capacity(m);
        for i in 0..m {
            let mut options: Vec<&SensorPacket> = eligible[i]
                .iter()
                .copied()
                .filter(|p| p.t_pre >= low && p.t_pre <= pivot)
                .collect();
            options.sort_by_key(|p| p.seq);
            let pick = options
                .into_iter()
                .find(|p| completion_feasible(&chosen, p, &eligible[i + 1..], pivot, low))
                .expect("feasible pivot admits a completion");
            chosen.push(*pick);
        }
        Some(chosen)
    }
}

/// Smallest `max - min` over selections of one eligible stamp per stream.
fn minimal_covering_spread(merged: &[(TimePoint, usize)], streams: usize) -> Option<Duration> {
    let mut counts = alloc::vec![0usize; streams];
    let mut covered = 0usize;
    let mut lo = 0usize;
    let mut best: Option<Duration> = None;
    for hi in 0..merged.len() {
        let s = merged[hi].1;
        if counts[s] == 0 {
            covered += 1;
        }
        counts[s] += 1;
        while covered == streams {
            let span = merged[hi].0 - merged[lo].0;
            best = Some(best.map_or(span, |b| b.min(span)));
            let s_lo = merged[lo].1;
            counts[s_lo] -= 1;
            if counts[s_lo] == 0 {
                covered -= 1;
            }
            lo += 1;
        }
    }
    best
}

fn stream_has_value_in(list: &[&SensorPacket], lo: TimePoint, hi: TimePoint) -> bool {
    list.iter().any(|p| p.t_pre >= lo && p.t_pre <= hi)
}

fn stream_has_exact(list: &[&SensorPacket], v: TimePoint) -> bool {
    list.iter().any(|p| p.t_pre == v)
}

/// Smallest stamp value that can be the maximum of a candidate with the given
/// (minimal) spread.
fn minimal_feasible_pivot(
    eligible: &[Vec<&SensorPacket>],
    merged: &[(TimePoint, usize)],
    spread: Duration,
) -> Option<TimePoint> {
    let mut prev: Option<TimePoint> = None;
    for &(v, _) in merged {
        if prev == Some(v) {
            continue;
        }
        prev = Some(v);
        let low = v - spread;

        if !eligible.iter().all(|list| stream_has_value_in(list, low, v)) {
            continue;
        }
        if spread == Duration::ZERO {
            if eligible.iter().all(|list| stream_has_exact(list, v)) {
                return Some(v);
            }
            continue;
        }
        let at_max: Vec<usize> =
            (0..eligible.len()).filter(|&i| stream_has_exact(&eligible[i], v)).collect();
        let at_min: Vec<usize> =
            (0..eligible.len()).filter(|&i| stream_has_exact(&eligible[i], low)).collect();
        if at_max.is_empty() || at_min.is_empty() {
            continue;
        }
        // One stream provides the max and a different one the min; a lone
        // stream cannot supply both endpoints of a nonzero spread.
        if at_max.len() == 1 && at_min.len() == 1 && at_max[0] == at_min[0] {
            continue;
        }
        return Some(v);
    }
    None
}

/// Can the partial selection `chosen + candidate` still be completed so that
/// some member sits exactly at `pivot` and some member exactly at `low`?
fn completion_feasible(
    chosen: &[SensorPacket],
    candidate: &SensorPacket,
    remaining: &[Vec<&SensorPacket>],
    pivot: TimePoint,
    low: TimePoint,
) -> bool {
    let covered_max =
        candidate.t_pre == pivot || chosen.iter().any(|p| p.t_pre == pivot);
    let covered_min = candidate.t_pre == low || chosen.iter().any(|p| p.t_pre == low);

    let rem_max: Vec<usize> =
        (0..remaining.len()).filter(|&i| stream_has_exact(&remaining[i], pivot)).collect();
    let rem_min: Vec<usize> =
        (0..remaining.len()).filter(|&i| stream_has_exact(&remaining[i], low)).collect();

    if pivot == low {
        return covered_max || !rem_max.is_empty();
    }
    if !covered_max && rem_max.is_empty() {
        return false;
    }
    if !covered_min && rem_min.is_empty() {
        return false;
    }
    if !covered_max
        && !covered_min
        && rem_max.len() == 1
        && rem_min.len() == 1
        && rem_max[0] == rem_min[0]
    {
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{Modality, SnapshotKey, StreamId};

    fn timing_1hz() -> StreamTiming {
        StreamTiming { period: Duration::from_secs(1), phase: Duration::ZERO }
    }

    fn state(streams: usize, slop_ms: i64, queue: usize) -> SyncState {
        SyncState::new(
            SyncPolicy {
                mode: SyncMode::Approximate,
                slop: Duration::from_millis(slop_ms),
                queue_size: queue,
            },
            alloc::vec![timing_1hz(); streams],
        )
    }

    fn pkt(stream: u32, seq: u64, t_pre_ms: i64) -> SensorPacket {
        pkt_full(stream, seq, t_pre_ms, t_pre_ms)
    }

    fn pkt_full(stream: u32, seq: u64, t_pre_ms: i64, t_act_ms: i64) -> SensorPacket {
        SensorPacket {
            stream: StreamId {
                index: stream,
                modality: if stream == 0 { Modality::Camera } else { Modality::Lidar },
            },
            seq,
            t_act: TimePoint::from_ns(t_act_ms * 1_000_000),
            t_pre: TimePoint::from_ns(t_pre_ms * 1_000_000),
            payload: SnapshotKey { frame: seq },
            forged: false,
        }
    }

    #[test]
    fn identical_stamps_pair_immediately() {
        let mut s = state(2, 10, 4);
        assert!(s.push(pkt(0, 0, 1000), TimePoint::from_ns(0)).tuples.is_empty());
        let out = s.push(pkt(1, 0, 1000), TimePoint::from_ns(1));
        assert_eq!(out.tuples.len(), 1);
        let t = &out.tuples[0];
        assert_eq!(t.spread, Duration::ZERO);
        assert_eq!(t.pivot, TimePoint::from_ns(1_000_000_000));
        assert_eq!(t.members[0].seq, 0);
        assert_eq!(t.members[1].seq, 0);
    }

    #[test]
    fn slop_excludes_too_wide_pairs() {
        let mut s = state(2, 10, 4);
        s.push(pkt(0, 0, 1000), TimePoint::from_ns(0));
        let out = s.push(pkt(1, 0, 1011), TimePoint::from_ns(1));
        assert!(out.tuples.is_empty());
    }

    #[test]
    fn exact_mode_behaves_as_zero_slop() {
        let mut s = SyncState::new(
            SyncPolicy { mode: SyncMode::Exact, slop: Duration::from_secs(9), queue_size: 4 },
            alloc::vec![timing_1hz(); 2],
        );
        s.push(pkt(0, 0, 1000), TimePoint::from_ns(0));
        assert!(s.push(pkt(1, 0, 1001), TimePoint::from_ns(1)).tuples.is_empty());
        let out = s.push(pkt(1, 1, 1000), TimePoint::from_ns(2));
        assert_eq!(out.tuples.len(), 1);
        assert_eq!(out.tuples[0].spread, Duration::ZERO);
    }

    #[test]
    fn min_spread_wins_over_arrival_order() {
        let mut s = state(2, 500, 4);
        s.push(pkt(0, 0, 1000), TimePoint::from_ns(0));
        s.push(pkt(1, 0, 1400), TimePoint::from_ns(1));
        // A tighter partner arrives later; matcher prefers it only while both
        // are still candidates at the same instant.
        let out = s.push(pkt(1, 1, 1010), TimePoint::from_ns(2));
        // (0,0)-(1,0) already satisfied slop and was emitted on its arrival.
        assert!(out.tuples.is_empty());

        let mut s = state(2, 500, 4);
        s.push(pkt(1, 0, 1400), TimePoint::from_ns(0));
        s.push(pkt(1, 1, 1010), TimePoint::from_ns(1));
        let out = s.push(pkt(0, 0, 1000), TimePoint::from_ns(2));
        assert_eq!(out.tuples.len(), 1);
        assert_eq!(out.tuples[0].members[1].seq, 1, "tighter stamp wins");
    }

    #[test]
    fn tie_breaks_on_pivot_then_seq() {
        // Two candidates with equal spread: {A@1000, B@1020} (pivot 1020) and
        // {A@1040, B@1020} (pivot 1040). Smaller pivot wins.
        let mut s = state(2, 50, 4);
        s.push(pkt(0, 0, 1000), TimePoint::from_ns(0));
        s.push(pkt(0, 1, 1040), TimePoint::from_ns(1));
        let out = s.push(pkt(1, 0, 1020), TimePoint::from_ns(2));
        assert_eq!(out.tuples.len(), 1);
        assert_eq!(out.tuples[0].members[0].seq, 0);
        assert_eq!(out.tuples[0].pivot, TimePoint::from_ns(1_020_000_000));

        // Identical stamps, differing seq: lexicographically smallest vector.
        let mut s = state(2, 50, 4);
        s.push(pkt(0, 3, 1000), TimePoint::from_ns(0));
        s.push(pkt(0, 5, 1000), TimePoint::from_ns(1));
        let out = s.push(pkt(1, 2, 1000), TimePoint::from_ns(2));
        assert_eq!(out.tuples.len(), 1);
        assert_eq!(out.tuples[0].members[0].seq, 3);
    }

    #[test]
    fn monotone_floor_blocks_stale_stamps() {
        let mut s = state(2, 100, 6);
        s.push(pkt(0, 0, 1000), TimePoint::from_ns(0));
        s.push(pkt(1, 0, 1000), TimePoint::from_ns(1));
        // Arrivals stamped at/below the emitted floor can never pair again.
        s.push(pkt(0, 1, 1000), TimePoint::from_ns(2));
        s.push(pkt(0, 2, 990), TimePoint::from_ns(3));
        let out = s.push(pkt(1, 1, 1000), TimePoint::from_ns(4));
        assert!(out.tuples.is_empty());
        let out = s.push(pkt(0, 3, 2000), TimePoint::from_ns(5));
        assert!(out.tuples.is_empty());
        let out = s.push(pkt(1, 2, 2000), TimePoint::from_ns(6));
        assert_eq!(out.tuples.len(), 1);
        assert_eq!(out.tuples[0].members[0].seq, 3);
    }

    #[test]
    fn queue_overflow_evicts_oldest() {
        let mut s = state(1, 10, 2);
        s.push(pkt(0, 0, 100), TimePoint::from_ns(0));
        // Single-stream state emits immediately; use two streams instead.
        let mut s2 = state(2, 0, 2);
        s2.push(pkt(0, 0, 100), TimePoint::from_ns(0));
        s2.push(pkt(0, 1, 200), TimePoint::from_ns(1));
        let out = s2.push(pkt(0, 2, 300), TimePoint::from_ns(2));
        assert_eq!(out.notes.len(), 1);
        assert!(matches!(out.notes[0], SyncNote::Evicted { stream: 0, seq: 0, .. }));
        // The evicted stamp can no longer pair.
        let out = s2.push(pkt(1, 0, 100), TimePoint::from_ns(3));
        assert!(out.tuples.is_empty());
        let _ = s;
    }

    #[test]
    fn duplicates_are_dropped_with_note() {
        let mut s = state(2, 10, 4);
        s.push(pkt(0, 0, 100), TimePoint::from_ns(0));
        let out = s.push(pkt(0, 0, 100), TimePoint::from_ns(1));
        assert_eq!(out.notes.len(), 1);
        assert!(matches!(out.notes[0], SyncNote::DuplicateDropped { stream: 0, seq: 0, .. }));
    }

    #[test]
    fn reset_clears_floors_and_queues() {
        let mut s = state(2, 10, 4);
        s.push(pkt(0, 0, 1000), TimePoint::from_ns(0));
        s.push(pkt(1, 0, 1000), TimePoint::from_ns(1));
        s.reset();
        // Below the old floor, but the floor is gone after reset.
        s.push(pkt(0, 1, 500), TimePoint::from_ns(2));
        let out = s.push(pkt(1, 1, 500), TimePoint::from_ns(3));
        assert_eq!(out.tuples.len(), 1);
    }

    #[test]
    fn shifted_stamp_pairs_with_matching_stamp_not_matching_content() {
        // Camera benign at 1 Hz; lidar stamps shifted +5 s while content is
        // real-time: the camera frame stamped t pairs with the lidar packet
        // stamped nearest t, whose content was captured 5 s earlier.
        let mut s = state(2, 600, 8);
        let mut tuples = Vec::new();
        for n in 0..=16u64 {
            let t = n as i64 * 1000;
            tuples.extend(s.push(pkt_full(0, n, t, t), TimePoint::from_ns(t * 1_000_000)).tuples);
            let (stamp, seq) = if n >= 6 { (t + 5000, n) } else { (t, n) };
            tuples.extend(
                s.push(pkt_full(1, seq, stamp, t), TimePoint::from_ns(t * 1_000_000)).tuples,
            );
        }
        // Pre-onset tuples are fresh; post-onset lidar content lags 5 frames.
        let offsets: Vec<i64> = tuples.iter().map(|t| t.content_offsets[1]).collect();
        assert_eq!(&offsets[..6], &[0, 0, 0, 0, 0, 0]);
        assert!(offsets[6..].iter().all(|&o| o == -5), "{offsets:?}");
        assert!(tuples.iter().all(|t| t.content_offsets[0] == 0));
    }

    #[test]
    fn half_period_shift_flips_to_neighboring_frame_by_pivot_rule() {
        // Lidar stamps shifted +half period: the camera stamp sits exactly
        // between two lidar stamps, both neighbors tie on spread, and the
        // smaller pivot wins: the camera pairs with the previous frame.
        let mut s = state(2, 500, 8);
        s.push(pkt(1, 0, 500), TimePoint::from_ns(0));
        s.push(pkt(1, 1, 1500), TimePoint::from_ns(1));
        let out = s.push(pkt(0, 1, 1000), TimePoint::from_ns(2));
        assert_eq!(out.tuples.len(), 1);
        assert_eq!(out.tuples[0].members[1].seq, 0, "previous frame wins the tie");
        assert_eq!(out.tuples[0].pivot, TimePoint::from_ns(1_000_000_000));
        assert_eq!(out.tuples[0].spread, Duration::from_millis(500));
    }

    #[test]
    fn content_offset_uses_payload_frame() {
        let mut s = state(2, 100, 4);
        s.push(pkt(0, 10, 10_000), TimePoint::from_ns(10_000_000_000));
        // Forged lidar packet: stamp for frame 10, content from frame 7.
        let mut forged = pkt_full(1, 10, 10_000, 7_000);
        forged.payload = SnapshotKey { frame: 7 };
        forged.forged = true;
        let out = s.push(forged, TimePoint::from_ns(10_000_000_000));
        assert_eq!(out.tuples.len(), 1);
        assert_eq!(out.tuples[0].content_offsets, alloc::vec![0, -3]);
    }

    #[test]
    fn three_stream_minimal_spread_selection() {
        let mut s = state(3, 1000, 6);
        s.push(pkt(0, 0, 1000), TimePoint::from_ns(0));
        s.push(pkt(0, 1, 1900), TimePoint::from_ns(1));
        s.push(pkt(1, 0, 1850), TimePoint::from_ns(2));
        let out = s.push(pkt(2, 0, 1800), TimePoint::from_ns(3));
        assert_eq!(out.tuples.len(), 1);
        let t = &out.tuples[0];
        assert_eq!(
            t.members.iter().map(|p| p.seq).collect::<Vec<_>>(),
            alloc::vec![1, 0, 0],
            "tight cluster beats wide one"
        );
        assert_eq!(t.spread, Duration::from_millis(100));
    }

    #[test]
    fn emission_is_monotone_per_stream() {
        let mut s = state(2, 100, 6);
        let mut last: Option<(TimePoint, TimePoint)> = None;
        let stamps = [(0i64, 0i64), (100, 100), (150, 150), (300, 260), (400, 400)];
        for (n, (a, b)) in stamps.into_iter().enumerate() {
            let n = n as u64;
            let o1 = s.push(pkt(0, n, a), TimePoint::from_ns(n as i64 * 10));
            let o2 = s.push(pkt(1, n, b), TimePoint::from_ns(n as i64 * 10 + 1));
            for t in o1.tuples.iter().chain(o2.tuples.iter()) {
                if let Some((pa, pb)) = last {
                    assert!(t.members[0].t_pre > pa);
                    assert!(t.members[1].t_pre > pb);
                }
                last = Some((t.members[0].t_pre, t.members[1].t_pre));
            }
        }
    }
}
