//! Test-only helpers: a brute-force reference synchronizer and small
//! statistics utilities. Nothing here shares code with the production
//! matcher; the oracle enumerates every candidate selection outright.

use misalign_core::pipeline::{Modality, SensorPacket, SnapshotKey, StreamId};
use misalign_core::rng::SimRng;
use misalign_core::timebase::TimePoint;

/// Reference matcher: after every arrival, enumerate all selections of one
/// eligible queued packet per stream, filter by the slop window and the
/// per-stream monotone floor, and emit the minimum under the objective
/// (spread, pivot, stream-ordered seq vector); repeat until no candidate
/// remains. Queue bookkeeping (duplicates, eviction, post-emission drops)
/// follows the same discipline the synchronizer documents.
pub struct OracleSync {
    slop_ns: i64,
    queue_size: usize,
    queues: Vec<Vec<SensorPacket>>,
    floors: Vec<Option<i64>>,
}

impl OracleSync {
    pub fn new(streams: usize, slop_ns: i64, queue_size: usize) -> Self {
        Self {
            slop_ns,
            queue_size,
            queues: vec![Vec::new(); streams],
            floors: vec![None; streams],
        }
    }

    pub fn push(&mut self, packet: SensorPacket) -> Vec<Vec<SensorPacket>> {
        let idx = packet.stream.index as usize;
        if self.queues[idx].iter().any(|q| q.seq == packet.seq && q.t_pre == packet.t_pre) {
            return Vec::new();
        }
        self.queues[idx].push(packet);
        if self.queues[idx].len() > self.queue_size {
            self.queues[idx].remove(0);
        }

        let mut emitted = Vec::new();
        while let Some(best) = self.best() {
            for (s, member) in best.iter().enumerate() {
                let floor = member.t_pre;
                self.floors[s] = Some(floor.ns());
                self.queues[s].retain(|p| p.t_pre > floor);
            }
            emitted.push(best);
        }
        emitted
    }

    fn best(&self) -> Option<Vec<SensorPacket>> {
        let eligible: Vec<Vec<&SensorPacket>> = self
            .queues
            .iter()
            .enumerate()
            .map(|(s, q)| {
                q.iter()
                    .filter(|p| self.floors[s].is_none_or(|f| p.t_pre.ns() > f))
                    .collect()
            })
            .collect();
        if eligible.iter().any(|e| e.is_empty()) {
            return None;
        }

        type ObjectiveKey = (i64, i64, Vec<u64>);
        let mut best: Option<(ObjectiveKey, Vec<SensorPacket>)> = None;
        let mut indices = vec![0usize; eligible.len()];
        loop {
            let choice: Vec<SensorPacket> =
                indices.iter().enumerate().map(|(s, &i)| *eligible[s][i]).collect();
            let hi = choice.iter().map(|p| p.t_pre.ns()).max().unwrap();
            let lo = choice.iter().map(|p| p.t_pre.ns()).min().unwrap();
            if hi - lo <= self.slop_ns {
                let key = (hi - lo, hi, choice.iter().map(|p| p.seq).collect::<Vec<_>>());
                if best.as_ref().is_none_or(|(k, _)| key < *k) {
                    best = Some((key, choice));
                }
            }
            // Advance the mixed-radix counter over all selections.
            let mut dim = 0;
            loop {
                if dim == indices.len() {
                    return best.map(|(_, c)| c);
                }
                indices[dim] += 1;
                if indices[dim] < eligible[dim].len() {
                    break;
                }
                indices[dim] = 0;
                dim += 1;
            }
        }
    }
}

pub fn modality_of(index: usize) -> Modality {
    match index {
        0 => Modality::Camera,
        1 => Modality::Lidar,
        _ => Modality::Other,
    }
}

/// Random matcher workload: stamps collide often to stress tie-breaking.
pub struct RandomInstance {
    pub streams: usize,
    pub queue_size: usize,
    pub slop_ns: i64,
    pub packets: Vec<SensorPacket>,
}

pub fn random_instance(rng: &mut SimRng) -> RandomInstance {
    let streams = 1 + (rng.next_u64() % 3) as usize;
    let queue_size = 1 + (rng.next_u64() % 6) as usize;
    let slop_ns = (rng.next_u64() % 9) as i64;
    let pushes = 4 + (rng.next_u64() % 26) as usize;
    let mut next_seq = vec![0u64; streams];
    let mut packets = Vec::with_capacity(pushes);
    for _ in 0..pushes {
        let stream = (rng.next_u64() % streams as u64) as usize;
        let stamp = (rng.next_u64() % 40) as i64;
        let seq = next_seq[stream];
        next_seq[stream] += 1;
        packets.push(SensorPacket {
            stream: StreamId { index: stream as u32, modality: modality_of(stream) },
            seq,
            t_act: TimePoint::from_ns(stamp),
            t_pre: TimePoint::from_ns(stamp),
            payload: SnapshotKey { frame: seq },
            forged: false,
        });
    }
    RandomInstance { streams, queue_size, slop_ns, packets }
}

/// Pearson chi-square statistic against a uniform expectation.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}
