//! Deterministic discrete-event loop: capture, attack transforms, channel
//! delivery, timestamp alignment, fusion, tracking, and scoring.
//!
//! Events are processed in strictly increasing `(time, stream, seq, kind)`
//! order out of an ordered map, so a scenario's bytes fully determine the
//! trace and report.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::adversary::{
    stale_content_fresh_stamp, shift_stamp, AttackSpec, Capability, ReplayState, StaleBuffer,
};
use crate::metrics::{
    match_frame, DetectionTotals, FrameCounts, MetricsReport, PairingStats, TrackingEvalState,
};
use crate::perception::{
    fuse, render_snapshot, ModalitySnapshot, PerceptionOutput, Position, Tracker,
};
use crate::pipeline::{capture_schedule, stamp_and_publish, Channel, Modality, SensorPacket, SnapshotKey};
use crate::rng::hash64;
use crate::scenario::{validate, Scenario, StreamConfig, ValidationIssue};
use crate::synchronizer::{AlignedTuple, StreamTiming, SyncNote, SyncState};
use crate::timebase::{ClockModel, Duration, TimePoint};
use crate::trace::{
    DetectionRecord, NoteRecord, PacketRecord, TraceRecord, TrackRecord, TupleMemberRecord,
    TupleRecord,
};

const SEED_TAG_CLOCK: u64 = 0x11;
const SEED_TAG_CHANNEL: u64 = 0x22;
const SEED_TAG_ATTACK: u64 = 0x33;

/// Trace plus final scores of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct EventKey {
    time: TimePoint,
    stream: u32,
    seq: u64,
    kind: u8,
}

const KIND_CAPTURE: u8 = 0;
const KIND_DELIVER: u8 = 1;
const KIND_FORGE_DELIVER: u8 = 2;

#[derive(Debug, Clone)]
enum EventBody {
    Capture { t_act: TimePoint },
    Deliver { packet: SensorPacket },
    ForgeDeliver { packet: SensorPacket },
}

/// Attack machinery attached to one stream.
enum AttackRole {
    None,
    ClockDesync { spec: AttackSpec, applied: bool },
    StaleContent { spec: AttackSpec, buffer: StaleBuffer },
    ShiftStamp { spec: AttackSpec },
    Replay { spec: AttackSpec, state: ReplayState },
}

struct StreamRuntime {
    cfg: StreamConfig,
    clock: ClockModel,
    channel: Channel,
    role: AttackRole,
}

struct Sim<'a> {
    scenario: &'a Scenario,
    events: BTreeMap<EventKey, EventBody>,
    streams: Vec<StreamRuntime>,
    sync: SyncState,
    snapshots: BTreeMap<(u32, u64), ModalitySnapshot>,
    tracker: Tracker,
    camera: usize,
    lidar: usize,
    detection: DetectionTotals,
    tracking: TrackingEvalState,
    pairing: PairingStats,
    per_frame: Vec<FrameCounts>,
    trace: Vec<TraceRecord>,
    tuple_index: u64,
}

/// Execute a scenario to its horizon. Fails up front with the full list of
/// validation issues.
pub fn run(scenario: &Scenario) -> Result<RunOutput, Vec<ValidationIssue>> {
    let issues = validate(scenario);
    if !issues.is_empty() {
        return Err(issues);
    }
    let mut sim = Sim::new(scenario);
    sim.schedule_captures();
    while let Some((key, body)) = sim.events.pop_first() {
        sim.handle(key, body);
    }
    Ok(sim.finish())
}

impl<'a> Sim<'a> {
    fn new(scenario: &'a Scenario) -> Self {
        let streams: Vec<StreamRuntime> = scenario
            .streams
            .iter()
            .map(|cfg| StreamRuntime {
                cfg: cfg.clone(),
                clock: ClockModel::new(
                    cfg.clock_offset,
                    cfg.clock_skew_ppm,
                    cfg.clock_jitter_stddev,
                    hash64(scenario.seed, &[SEED_TAG_CLOCK, cfg.id.index as u64]),
                ),
                channel: Channel::new(
                    cfg.channel_base_latency,
                    cfg.channel_jitter_stddev,
                    cfg.channel_allow_reorder,
                    hash64(scenario.seed, &[SEED_TAG_CHANNEL, cfg.id.index as u64]),
                ),
                role: AttackRole::None,
            })
            .collect();

        let mut sim = Sim {
            scenario,
            events: BTreeMap::new(),
            streams,
            sync: SyncState::new(
                scenario.sync,
                scenario
                    .streams
                    .iter()
                    .map(|s| StreamTiming { period: s.period, phase: s.phase })
                    .collect(),
            ),
            snapshots: BTreeMap::new(),
            tracker: Tracker::new(scenario.perception.gate_track, scenario.perception.max_miss),
            camera: scenario.stream_index_of(Modality::Camera).expect("validated") as usize,
            lidar: scenario.stream_index_of(Modality::Lidar).expect("validated") as usize,
            detection: DetectionTotals::default(),
            tracking: TrackingEvalState::new(),
            pairing: PairingStats::new(scenario.streams.len()),
            per_frame: Vec::new(),
            trace: Vec::new(),
            tuple_index: 0,
        };

        for (ai, spec) in scenario.attacks.iter().enumerate() {
            // The effective attack seed folds in the scenario seed so a seed
            // override re-randomizes attack draws, and the attack index so
            // multiple attacks draw independently.
            let resolved = AttackSpec {
                seed: hash64(scenario.seed, &[SEED_TAG_ATTACK, ai as u64, spec.seed]),
                ..spec.clone()
            };
            for &target in &resolved.targets {
                let role = match resolved.capability {
                    Capability::ClockDesync => {
                        AttackRole::ClockDesync { spec: resolved.clone(), applied: false }
                    }
                    Capability::TimestampForge => {
                        if resolved.delay.k() > 0 {
                            AttackRole::StaleContent {
                                spec: resolved.clone(),
                                buffer: StaleBuffer::new(),
                            }
                        } else {
                            AttackRole::ShiftStamp { spec: resolved.clone() }
                        }
                    }
                    Capability::ReplayImpersonate => AttackRole::Replay {
                        spec: resolved.clone(),
                        state: ReplayState::new(resolved.history_depth),
                    },
                };
                sim.streams[target as usize].role = role;
            }
        }
        sim
    }

    fn schedule_captures(&mut self) {
        for cfg in &self.scenario.streams {
            let schedule = capture_schedule(cfg.period, cfg.phase, self.scenario.horizon)
                .expect("validated period and phase");
            for (seq, t_act) in schedule.into_iter().enumerate() {
                self.schedule(
                    EventKey { time: t_act, stream: cfg.id.index, seq: seq as u64, kind: KIND_CAPTURE },
                    EventBody::Capture { t_act },
                );
            }
        }
    }

    /// Insert an event; the ordering key must be unique, so collisions (only
    /// possible for injected forgeries) are nudged forward by a nanosecond.
    fn schedule(&mut self, mut key: EventKey, body: EventBody) {
        while self.events.contains_key(&key) {
            key.time = key.time + Duration::from_ns(1);
        }
        self.events.insert(key, body);
    }

    fn handle(&mut self, key: EventKey, body: EventBody) {
        match body {
            EventBody::Capture { t_act } => self.handle_capture(key.stream, key.seq, t_act),
            EventBody::Deliver { packet } => self.handle_deliver(packet, key.time, false),
            EventBody::ForgeDeliver { packet } => self.handle_deliver(packet, key.time, true),
        }
    }

    fn handle_capture(&mut self, stream: u32, seq: u64, t_act: TimePoint) {
        let idx = stream as usize;

        let desync = match &self.streams[idx].role {
            AttackRole::ClockDesync { spec, applied: false } if spec.active_at(t_act) => {
                Some((spec.clock_offset, spec.clock_skew_ppm))
            }
            _ => None,
        };
        if let Some((offset, skew)) = desync {
            self.streams[idx].clock = self.streams[idx].clock.corrupt_sync(offset, skew);
            if let AttackRole::ClockDesync { applied, .. } = &mut self.streams[idx].role {
                *applied = true;
            }
            self.trace.push(TraceRecord::Note(NoteRecord::ClockCorrupted { t_sys: t_act, stream }));
        }

        let snapshot = render_snapshot(
            &self.scenario.world,
            self.streams[idx].cfg.id,
            &self.streams[idx].cfg.fov,
            self.scenario.perception.sigma_cam,
            t_act,
            self.scenario.seed,
        );
        self.snapshots.insert((stream, seq), snapshot);

        let runtime = &mut self.streams[idx];
        let genuine = stamp_and_publish(
            runtime.cfg.id,
            seq,
            t_act,
            &mut runtime.clock,
            SnapshotKey { frame: seq },
        );

        let mut notes: Vec<NoteRecord> = Vec::new();
        let outgoing = match &mut runtime.role {
            AttackRole::StaleContent { spec, buffer } => {
                // The compromised publisher records every genuine frame, and
                // substitutes stale content once the attack is live.
                buffer.record(genuine);
                buffer.prune_below(seq.saturating_sub(spec.delay.k() as u64 + 1));
                if spec.active_at(t_act) {
                    let forgery = stale_content_fresh_stamp(spec, buffer, runtime.cfg.id, seq)
                        .expect("current frame was just recorded");
                    if let Some(used) = forgery.clamped_to_seq {
                        notes.push(NoteRecord::HistoryClamped {
                            t_sys: t_act,
                            stream,
                            seq,
                            used_frame: used,
                        });
                    }
                    forgery.packet
                } else {
                    genuine
                }
            }
            AttackRole::ShiftStamp { spec } => {
                if spec.active_at(t_act) {
                    shift_stamp(spec, &genuine)
                } else {
                    genuine
                }
            }
            _ => genuine,
        };
        self.trace.extend(notes.into_iter().map(TraceRecord::Note));

        let arrival = self.streams[idx]
            .channel
            .transmit(&outgoing, t_act)
            .expect("send time equals capture time");
        self.schedule(
            EventKey { time: arrival, stream, seq, kind: KIND_DELIVER },
            EventBody::Deliver { packet: outgoing },
        );
    }

    fn handle_deliver(&mut self, packet: SensorPacket, now: TimePoint, injected: bool) {
        let idx = packet.stream.index as usize;
        self.trace.push(TraceRecord::Packet(PacketRecord {
            stream: packet.stream.index,
            modality: packet.stream.modality,
            seq: packet.seq,
            t_act: packet.t_act,
            t_pre: packet.t_pre,
            arrival: now,
            frame: packet.payload.frame,
            forged: packet.forged,
            injected,
        }));

        // An impersonating node watches the genuine topic and schedules one
        // forged packet ahead of each predicted arrival.
        if !injected && !packet.forged {
            if let AttackRole::Replay { spec, state } = &mut self.streams[idx].role {
                if spec.active_at(packet.t_act) {
                    if let Some(forgery) = state.observe(&packet, now, spec) {
                        if forgery.clamped_history {
                            self.trace.push(TraceRecord::Note(NoteRecord::HistoryClamped {
                                t_sys: now,
                                stream: packet.stream.index,
                                seq: forgery.packet.seq,
                                used_frame: forgery.packet.payload.frame,
                            }));
                        }
                        self.schedule(
                            EventKey {
                                time: forgery.deliver_at,
                                stream: packet.stream.index,
                                seq: forgery.packet.seq,
                                kind: KIND_FORGE_DELIVER,
                            },
                            EventBody::ForgeDeliver { packet: forgery.packet },
                        );
                    }
                }
            }
        }

        let output = self.sync.push(packet, now);
        for note in output.notes {
            self.trace.push(TraceRecord::Note(match note {
                SyncNote::DuplicateDropped { stream, seq, t_pre } => {
                    NoteRecord::DuplicateDropped { t_sys: now, stream, seq, t_pre }
                }
                SyncNote::Evicted { stream, seq, t_pre } => {
                    NoteRecord::QueueEvicted { t_sys: now, stream, seq, t_pre }
                }
            }));
        }
        for tuple in output.tuples {
            self.process_tuple(tuple);
        }
    }

    fn process_tuple(&mut self, tuple: AlignedTuple) {
        let t_sys = tuple.t_sys;
        self.trace.push(TraceRecord::Tuple(TupleRecord {
            index: self.tuple_index,
            t_sys,
            pivot: tuple.pivot,
            spread: tuple.spread,
            members: tuple
                .members
                .iter()
                .zip(&tuple.content_offsets)
                .map(|(m, &off)| TupleMemberRecord {
                    stream: m.stream.index,
                    seq: m.seq,
                    t_act: m.t_act,
                    t_pre: m.t_pre,
                    frame: m.payload.frame,
                    content_offset: off,
                    forged: m.forged,
                })
                .collect(),
        }));
        self.tuple_index += 1;
        self.pairing.record(&tuple);

        let cam_member = &tuple.members[self.camera];
        let lidar_member = &tuple.members[self.lidar];
        let cam_snap = self
            .snapshots
            .get(&(cam_member.stream.index, cam_member.payload.frame))
            .expect("camera content rendered at capture");
        let lidar_snap = self
            .snapshots
            .get(&(lidar_member.stream.index, lidar_member.payload.frame))
            .expect("lidar content rendered at capture");

        let detections = fuse(
            cam_snap,
            lidar_snap,
            self.scenario.perception.fuse_mode,
            self.scenario.perception.gate,
        )
        .expect("stream modalities validated");

        self.tracker.update(&detections, t_sys);
        let output =
            PerceptionOutput { t_sys, detections, tracks: self.tracker.fresh_tracks() };

        let gt: Vec<(u32, Position)> = self
            .scenario
            .world
            .alive_at(t_sys)
            .into_iter()
            .map(|(oid, pos, _)| (oid, pos))
            .collect();

        let det_positions: Vec<Position> = output.detections.iter().map(|d| d.position).collect();
        let frame = match_frame(&det_positions, &gt, self.scenario.metrics.match_radius, t_sys);

        for (i, det) in output.detections.iter().enumerate() {
            let matched_oid = frame.matches.iter().find(|&&(_, di)| di == i).map(|&(oid, _)| oid);
            self.trace.push(TraceRecord::Detection(DetectionRecord {
                t_sys,
                index: i,
                x: det.position[0],
                y: det.position[1],
                class: det.class,
                camera_support: det.supporting.camera,
                lidar_support: det.supporting.lidar,
                matched_oid,
            }));
        }
        self.trace.push(TraceRecord::Note(NoteRecord::FrameEval {
            t_sys,
            true_pos: frame.true_pos,
            false_pos: frame.false_pos,
            false_neg: frame.false_neg,
            gt_alive: gt.len() as u64,
            detections: output.detections.len() as u64,
        }));
        self.per_frame.push(FrameCounts {
            t_sys,
            true_pos: frame.true_pos,
            false_pos: frame.false_pos,
            false_neg: frame.false_neg,
        });
        self.detection.absorb(&frame);

        for t in &output.tracks {
            self.trace.push(TraceRecord::Track(TrackRecord {
                t_sys,
                tid: t.tid,
                x: t.position[0],
                y: t.position[1],
                vx: t.velocity[0],
                vy: t.velocity[1],
                age: t.age,
                class: t.class,
            }));
        }
        let hyps: Vec<(u64, Position)> = output.tracks.iter().map(|t| (t.tid, t.position)).collect();
        for sw in self.tracking.observe(&gt, &hyps, self.scenario.metrics.match_radius) {
            self.trace.push(TraceRecord::Note(NoteRecord::IdSwitch {
                t_sys,
                oid: sw.oid,
                old_tid: sw.old_tid,
                new_tid: sw.new_tid,
            }));
        }
    }

    fn finish(self) -> RunOutput {
        let report = MetricsReport {
            mean_abs_offset: self.pairing.mean_abs_offset(),
            pairing: self.pairing,
            detection: self.detection,
            precision: self.detection.precision(),
            recall: self.detection.recall(),
            f1: self.detection.f1(),
            mota: self.tracking.mota(),
            idsw: self.tracking.idsw,
            tracking_false_pos: self.tracking.false_pos,
            tracking_false_neg: self.tracking.false_neg,
            tracking_gt_total: self.tracking.gt_total,
            per_frame: self.per_frame,
        };
        debug_assert!(report.decomposition_holds());
        RunOutput { trace: self.trace, report }
    }
}
