//! Temporal-misalignment attack machinery.
//!
//! Three attacker capabilities are modeled:
//!
//! * clock-sync corruption, routed to [`crate::timebase::ClockModel::corrupt_sync`],
//! * timestamp forging: either stale content under a fresh stamp
//!   ([`stale_content_fresh_stamp`]) or genuine content under a shifted stamp
//!   ([`shift_stamp`]); the two stress opposite halves of the packet,
//! * replay impersonation: re-publishing recorded content just ahead of the
//!   predicted genuine arrival ([`ReplayState`]).
//!
//! Delays are parameterized in whole frames; one frame on stream `i` equals
//! that stream's capture period.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use crate::pipeline::{SensorPacket, StreamId};
use crate::rng::hash64;
use crate::timebase::{Duration, SkewPpm, TimePoint};

/// Smoothing factor for the replay attacker's inter-arrival estimate.
pub const REPLAY_EMA_ALPHA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capability {
    /// Corrupt the synchronization infrastructure (grandmaster spoofing,
    /// sync-message delay): stamps stay locally honest but drift from global
    /// time.
    ClockDesync,
    /// Forge the timestamps carried by packets of a compromised publisher.
    TimestampForge,
    /// Impersonate a legitimate publisher, replaying recorded content with
    /// fresh-looking stamps.
    ReplayImpersonate,
}

/// Per-frame malicious delay, in frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayModel {
    Constant { k: u32 },
    Uniform { k: u32 },
}

impl DelayModel {
    pub fn k(&self) -> u32 {
        match *self {
            DelayModel::Constant { k } | DelayModel::Uniform { k } => k,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.k() == 0
    }
}

/// Full description of one attack applied to a set of streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackSpec {
    /// Stream indices under attacker control.
    pub targets: Vec<u32>,
    pub capability: Capability,
    pub delay: DelayModel,
    /// Stamp shift for timestamp forging with genuine content.
    pub stamp_offset: Duration,
    /// How far ahead of the predicted genuine arrival a replayed packet is
    /// injected.
    pub lead: Duration,
    /// How many frames back the replayed content is taken from.
    pub history_depth: usize,
    /// Attack is inactive for content captured before this instant.
    pub start_time: TimePoint,
    /// Clock corruption injected under `ClockDesync`.
    pub clock_offset: Duration,
    pub clock_skew_ppm: SkewPpm,
    pub seed: u64,
}

impl AttackSpec {
    pub fn targets_stream(&self, index: u32) -> bool {
        self.targets.contains(&index)
    }

    pub fn active_at(&self, t_act: TimePoint) -> bool {
        t_act >= self.start_time
    }

    /// Malicious delay for frame `seq` of `stream`, in frames.
    ///
    /// Constant delays ignore the frame index; uniform delays are i.i.d.
    /// integers on `{0..=k}`, computed counter-style from
    /// `(seed, stream, seq)` so draws are independent across targeted
    /// streams and reproducible without replaying a sequence.
    pub fn sample_delay(&self, stream: StreamId, seq: u64) -> u32 {
        match self.delay {
            DelayModel::Constant { k } => k,
            DelayModel::Uniform { k } => {
                if k == 0 {
                    0
                } else {
                    (hash64(self.seed, &[stream.index as u64, seq]) % (k as u64 + 1)) as u32
                }
            }
        }
    }

    /// Materialized delay schedule for frames `0..frame_count`.
    pub fn delay_schedule(&self, stream: StreamId, frame_count: u64) -> DelaySchedule {
        DelaySchedule {
            by_frame: (0..frame_count).map(|seq| (seq, self.sample_delay(stream, seq))).collect(),
        }
    }
}

/// Map from frame index to its malicious delay in frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelaySchedule {
    pub by_frame: BTreeMap<u64, u32>,
}

/// The compromised publisher's record of genuine frames, keyed by sequence
/// number. Bounded: frames older than the deepest possible lookback are
/// pruned by the caller via [`StaleBuffer::prune_below`].
#[derive(Debug, Clone, Default)]
pub struct StaleBuffer {
    packets: BTreeMap<u64, SensorPacket>,
}

impl StaleBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, packet: SensorPacket) {
        self.packets.insert(packet.seq, packet);
    }

    pub fn get(&self, seq: u64) -> Option<&SensorPacket> {
        self.packets.get(&seq)
    }

    pub fn oldest_seq(&self) -> Option<u64> {
        self.packets.keys().next().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn prune_below(&mut self, min_seq: u64) {
        self.packets.retain(|&s, _| s >= min_seq);
    }
}

/// Result of forging one stale-content packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StaleForgery {
    pub packet: SensorPacket,
    /// Set when the drawn delay reached past the buffered history and the
    /// lookback was clamped to the oldest retained frame.
    pub clamped_to_seq: Option<u64>,
}

/// Forge the packet for frame `current_seq`: content and capture time come
/// from `sample_delay` frames back, while the carried stamp is the benign
/// stamp of the current frame. Returns `None` while the buffer has not yet
/// seen the current genuine frame.
pub fn stale_content_fresh_stamp(
    spec: &AttackSpec,
    buffer: &StaleBuffer,
    stream: StreamId,
    current_seq: u64,
) -> Option<StaleForgery> {
    let current = buffer.get(current_seq)?;
    let d = spec.sample_delay(stream, current_seq) as u64;
    let wanted = if d > current_seq { None } else { buffer.get(current_seq - d) };
    let (source, clamped_to_seq) = match wanted {
        Some(p) => (p, None),
        None => {
            let oldest = buffer.oldest_seq()?;
            (buffer.get(oldest).expect("oldest present"), Some(oldest))
        }
    };
    Some(StaleForgery {
        packet: SensorPacket {
            stream,
            seq: current_seq,
            t_act: source.t_act,
            payload: source.payload,
            t_pre: current.t_pre,
            forged: true,
        },
        clamped_to_seq,
    })
}

/// Forge the stamp of a genuine packet: content and send time untouched,
/// `t_pre` shifted by the spec's stamp offset.
pub fn shift_stamp(spec: &AttackSpec, packet: &SensorPacket) -> SensorPacket {
    SensorPacket {
        t_pre: packet.t_pre + spec.stamp_offset,
        forged: true,
        ..*packet
    }
}

/// A forged injection scheduled by the replay attacker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduledForgery {
    /// When the forged packet hits the fusion node's input queue.
    pub deliver_at: TimePoint,
    pub packet: SensorPacket,
    /// Set when fewer than `history_depth` frames were recorded and the
    /// oldest retained one was used instead.
    pub clamped_history: bool,
}

/// Replay impersonation state for one targeted stream.
///
/// The attacker subscribes to the genuine topic, tracks inter-arrival times
/// with an exponential moving average, and after each genuine arrival
/// schedules one forged packet at `predicted next arrival - lead`. The forged
/// stamp extrapolates the observed stamp period so it looks like the expected
/// genuine message.
#[derive(Debug, Clone)]
pub struct ReplayState {
    history: VecDeque<SensorPacket>,
    history_depth: usize,
    last_arrival: Option<TimePoint>,
    ema_arrival_ns: Option<f64>,
    last_stamp: Option<TimePoint>,
    ema_stamp_ns: Option<f64>,
}

impl ReplayState {
    pub fn new(history_depth: usize) -> Self {
        debug_assert!(history_depth >= 1);
        Self {
            history: VecDeque::new(),
            history_depth,
            last_arrival: None,
            ema_arrival_ns: None,
            last_stamp: None,
            ema_stamp_ns: None,
        }
    }

    /// Record one genuine arrival; returns the forged packet to inject ahead
    /// of the next genuine one, once the period is estimable.
    pub fn observe(
        &mut self,
        packet: &SensorPacket,
        arrival: TimePoint,
        spec: &AttackSpec,
    ) -> Option<ScheduledForgery> {
        if let Some(prev) = self.last_arrival {
            let delta = (arrival - prev).ns() as f64;
            self.ema_arrival_ns = Some(match self.ema_arrival_ns {
                None => delta,
                Some(e) => REPLAY_EMA_ALPHA * delta + (1.0 - REPLAY_EMA_ALPHA) * e,
            });
        }
        self.last_arrival = Some(arrival);

        if let Some(prev) = self.last_stamp {
            let delta = (packet.t_pre - prev).ns() as f64;
            self.ema_stamp_ns = Some(match self.ema_stamp_ns {
                None => delta,
                Some(e) => REPLAY_EMA_ALPHA * delta + (1.0 - REPLAY_EMA_ALPHA) * e,
            });
        }
        self.last_stamp = Some(packet.t_pre);

        self.history.push_back(*packet);
        while self.history.len() > self.history_depth {
            self.history.pop_front();
        }

        let ema_arrival = self.ema_arrival_ns?;
        let ema_stamp = self.ema_stamp_ns?;
        let predicted = arrival + Duration::from_ns(libm::round(ema_arrival) as i64);
        let deliver_at = predicted - spec.lead;
        if deliver_at <= arrival {
            return None;
        }

        let clamped_history = self.history.len() < self.history_depth;
        let source = self.history.front().expect("observed at least one packet");
        let forged_stamp = packet.t_pre + Duration::from_ns(libm::round(ema_stamp) as i64);
        Some(ScheduledForgery {
            deliver_at,
            packet: SensorPacket {
                stream: packet.stream,
                seq: packet.seq + 1,
                t_act: source.t_act,
                payload: source.payload,
                t_pre: forged_stamp,
                forged: true,
            },
            clamped_history,
        })
    }
}
