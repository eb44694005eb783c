//! Run scoring: per-frame detection matching, precision/recall/F1,
//! CLEAR-MOT tracking accounting (MOTA, identity switches), and
//! pairing-offset statistics from synchronizer output.
//!
//! Matching is center-distance based (the toy world has radial extents, not
//! boxes); MOTA is kept in exact rational arithmetic.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_rational::Ratio;

use crate::perception::{squared_distance, Position};
use crate::synchronizer::AlignedTuple;
use crate::timebase::TimePoint;

/// Outcome of matching one frame's detections against the ground-truth
/// alive set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionFrameResult {
    pub t_sys: TimePoint,
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    /// Matched pairs `(oid, detection index)`.
    pub matches: Vec<(u32, usize)>,
}

/// Greedy ascending-distance one-to-one matching within `radius`,
/// deterministic tie-break on (oid, detection index).
pub fn match_frame(
    detections: &[Position],
    gt_alive: &[(u32, Position)],
    radius: f64,
    t_sys: TimePoint,
) -> DetectionFrameResult {
    debug_assert!(radius > 0.0);
    let radius2 = radius * radius;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (gi, &(_, gpos)) in gt_alive.iter().enumerate() {
        for (di, &dpos) in detections.iter().enumerate() {
            let d2 = squared_distance(gpos, dpos);
            if d2 <= radius2 {
                pairs.push((d2, gi, di));
            }
        }
    }
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("distances are finite")
            .then_with(|| gt_alive[a.1].0.cmp(&gt_alive[b.1].0))
            .then_with(|| a.2.cmp(&b.2))
    });

    let mut gt_used = alloc::vec![false; gt_alive.len()];
    let mut det_used = alloc::vec![false; detections.len()];
    let mut matches = Vec::new();
    for (_, gi, di) in pairs {
        if !gt_used[gi] && !det_used[di] {
            gt_used[gi] = true;
            det_used[di] = true;
            matches.push((gt_alive[gi].0, di));
        }
    }
    matches.sort_by_key(|&(oid, _)| oid);

    let tp = matches.len() as u64;
    DetectionFrameResult {
        t_sys,
        true_pos: tp,
        false_pos: detections.len() as u64 - tp,
        false_neg: gt_alive.len() as u64 - tp,
        matches,
    }
}

/// Running detection totals across frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DetectionTotals {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl DetectionTotals {
    pub fn absorb(&mut self, frame: &DetectionFrameResult) {
        self.true_pos += frame.true_pos;
        self.false_pos += frame.false_pos;
        self.false_neg += frame.false_neg;
    }

    pub fn precision(&self) -> f64 {
        ratio_or_zero(self.true_pos, self.true_pos + self.false_pos)
    }

    pub fn recall(&self) -> f64 {
        ratio_or_zero(self.true_pos, self.true_pos + self.false_neg)
    }

    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio_or_zero(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// An identity switch: a ground-truth object matched to a different track
/// than last time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdSwitch {
    pub oid: u32,
    pub old_tid: u64,
    pub new_tid: u64,
}

/// CLEAR-MOT accumulator over ground truth and reported track hypotheses.
///
/// Per frame: previously established (oid, tid) pairs are kept when still
/// within radius, remaining pairs are matched greedily by distance, and an
/// identity switch is counted whenever an object matches a track different
/// from its last matched one (gaps do not reset that memory).
#[derive(Debug, Clone, Default)]
pub struct TrackingEvalState {
    last_tid: BTreeMap<u32, u64>,
    pub false_pos: u64,
    pub false_neg: u64,
    pub idsw: u64,
    pub gt_total: u64,
}

impl TrackingEvalState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(
        &mut self,
        gt_alive: &[(u32, Position)],
        hypotheses: &[(u64, Position)],
        radius: f64,
    ) -> Vec<IdSwitch> {
        let radius2 = radius * radius;
        let mut gt_used = alloc::vec![false; gt_alive.len()];
        let mut hyp_used = alloc::vec![false; hypotheses.len()];
        let mut matched: Vec<(u32, u64)> = Vec::new();

        // Keep last frame's associations while they remain valid.
        for (gi, &(oid, gpos)) in gt_alive.iter().enumerate() {
            if let Some(&tid) = self.last_tid.get(&oid) {
                if let Some(hi) = hypotheses.iter().position(|&(h, _)| h == tid) {
                    if !hyp_used[hi] && squared_distance(gpos, hypotheses[hi].1) <= radius2 {
                        gt_used[gi] = true;
                        hyp_used[hi] = true;
                        matched.push((oid, tid));
                    }
                }
            }
        }

        // Greedy distance matching for the rest.
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (gi, &(_, gpos)) in gt_alive.iter().enumerate() {
            if gt_used[gi] {
                continue;
            }
            for (hi, &(_, hpos)) in hypotheses.iter().enumerate() {
                if hyp_used[hi] {
                    continue;
                }
                let d2 = squared_distance(gpos, hpos);
                if d2 <= radius2 {
                    pairs.push((d2, gi, hi));
                }
            }
        }
        pairs.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("distances are finite")
                .then_with(|| gt_alive[a.1].0.cmp(&gt_alive[b.1].0))
                .then_with(|| a.2.cmp(&b.2))
        });
        for (_, gi, hi) in pairs {
            if !gt_used[gi] && !hyp_used[hi] {
                gt_used[gi] = true;
                hyp_used[hi] = true;
                matched.push((gt_alive[gi].0, hypotheses[hi].0));
            }
        }

        let mut switches = Vec::new();
        matched.sort_by_key(|&(oid, _)| oid);
        for (oid, tid) in matched {
            if let Some(&prev) = self.last_tid.get(&oid) {
                if prev != tid {
                    self.idsw += 1;
                    switches.push(IdSwitch { oid, old_tid: prev, new_tid: tid });
                }
            }
            self.last_tid.insert(oid, tid);
        }

        let tp = gt_used.iter().filter(|&&u| u).count() as u64;
        self.false_neg += gt_alive.len() as u64 - tp;
        self.false_pos += hypotheses.len() as u64 - tp;
        self.gt_total += gt_alive.len() as u64;
        switches
    }

    /// `1 - (fn + fp + idsw) / gt`, exact; absent when no ground truth was
    /// observed.
    pub fn mota(&self) -> Option<Ratio<i64>> {
        if self.gt_total == 0 {
            return None;
        }
        let miss = (self.false_neg + self.false_pos + self.idsw) as i64;
        Some(Ratio::from_integer(1) - Ratio::new(miss, self.gt_total as i64))
    }
}

/// Per-stream histogram of tuple content offsets (in frames).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairingStats {
    pub per_stream: Vec<BTreeMap<i64, u64>>,
}

impl PairingStats {
    pub fn new(streams: usize) -> Self {
        Self { per_stream: alloc::vec![BTreeMap::new(); streams] }
    }

    pub fn record(&mut self, tuple: &AlignedTuple) {
        for (i, &off) in tuple.content_offsets.iter().enumerate() {
            *self.per_stream[i].entry(off).or_insert(0) += 1;
        }
    }

    pub fn mean_abs_offset(&self) -> f64 {
        let mut sum = 0u64;
        let mut n = 0u64;
        for hist in &self.per_stream {
            for (&off, &count) in hist {
                sum += off.unsigned_abs() * count;
                n += count;
            }
        }
        ratio_or_zero(sum, n)
    }

    /// Histogram of one stream, as (offset, count) pairs.
    pub fn histogram(&self, stream: usize) -> Vec<(i64, u64)> {
        self.per_stream[stream].iter().map(|(&o, &c)| (o, c)).collect()
    }
}

/// Per-frame detection counts retained in the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameCounts {
    pub t_sys: TimePoint,
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

/// Everything a scenario run is scored on.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub pairing: PairingStats,
    pub mean_abs_offset: f64,
    pub detection: DetectionTotals,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mota: Option<Ratio<i64>>,
    pub idsw: u64,
    pub tracking_false_pos: u64,
    pub tracking_false_neg: u64,
    pub tracking_gt_total: u64,
    pub per_frame: Vec<FrameCounts>,
}

impl MetricsReport {
    pub fn mota_f64(&self) -> Option<f64> {
        self.mota.map(|m| *m.numer() as f64 / *m.denom() as f64)
    }

    /// Recompute MOTA and the per-frame sums from raw counters; a report
    /// must always satisfy its own decomposition.
    pub fn decomposition_holds(&self) -> bool {
        let mota_ok = match (self.mota, self.tracking_gt_total) {
            (None, 0) => true,
            (Some(m), gt) if gt > 0 => {
                let miss = (self.tracking_false_neg + self.tracking_false_pos + self.idsw) as i64;
                m == Ratio::from_integer(1) - Ratio::new(miss, gt as i64)
            }
            _ => false,
        };
        let frame_sums = self.per_frame.iter().fold((0u64, 0u64, 0u64), |acc, f| {
            (acc.0 + f.true_pos, acc.1 + f.false_pos, acc.2 + f.false_neg)
        });
        mota_ok
            && frame_sums
                == (self.detection.true_pos, self.detection.false_pos, self.detection.false_neg)
    }
}
