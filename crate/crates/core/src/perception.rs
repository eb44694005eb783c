//! Synthetic world and rule-based stand-ins for the perception stack:
//! per-modality snapshot rendering, camera/LiDAR fusion, and a greedy
//! constant-velocity tracker.
//!
//! The world is a 2D ground plane with radial object extents. That is enough
//! to reproduce the false-positive / false-negative / identity-switch
//! phenomenology of misaligned fusion without any learned components.

use alloc::vec::Vec;
use core::fmt;

use crate::pipeline::{Modality, StreamId};
use crate::rng::{hash64, SimRng};
use crate::timebase::TimePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectClass {
    Car,
    Pedestrian,
    Cyclist,
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectClass::Car => "car",
            ObjectClass::Pedestrian => "pedestrian",
            ObjectClass::Cyclist => "cyclist",
        })
    }
}

pub type Position = [f64; 2];

pub fn distance(a: Position, b: Position) -> f64 {
    libm::sqrt(squared_distance(a, b))
}

pub fn squared_distance(a: Position, b: Position) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Piecewise-linear trajectory sample point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub t: TimePoint,
    pub x: f64,
    pub y: f64,
}

/// Ground-truth object: alive on `[spawn, despawn)`, position linearly
/// interpolated between waypoints (clamped outside their range).
#[derive(Debug, Clone, PartialEq)]
pub struct WorldObject {
    pub oid: u32,
    pub class: ObjectClass,
    pub waypoints: Vec<Waypoint>,
    pub extent: f64,
    pub spawn: TimePoint,
    pub despawn: TimePoint,
}

impl WorldObject {
    pub fn alive_at(&self, t: TimePoint) -> bool {
        self.spawn <= t && t < self.despawn
    }

    pub fn position_at(&self, t: TimePoint) -> Position {
        let wps = &self.waypoints;
        debug_assert!(!wps.is_empty());
        if t <= wps[0].t {
            return [wps[0].x, wps[0].y];
        }
        if t >= wps[wps.len() - 1].t {
            let w = wps[wps.len() - 1];
            return [w.x, w.y];
        }
        let hi = wps.partition_point(|w| w.t <= t);
        let a = wps[hi - 1];
        let b = wps[hi];
        let alpha = (t - a.t).ns() as f64 / (b.t - a.t).ns() as f64;
        [a.x + alpha * (b.x - a.x), a.y + alpha * (b.y - a.y)]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct World {
    pub objects: Vec<WorldObject>,
}

impl World {
    /// Ground-truth alive set at `t`: `(oid, position, class)` ordered by oid.
    pub fn alive_at(&self, t: TimePoint) -> Vec<(u32, Position, ObjectClass)> {
        let mut out: Vec<_> = self
            .objects
            .iter()
            .filter(|o| o.alive_at(t))
            .map(|o| (o.oid, o.position_at(t), o.class))
            .collect();
        out.sort_by_key(|&(oid, _, _)| oid);
        out
    }
}

/// Angular sector a sensor can see, centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fov {
    pub heading_deg: f64,
    pub half_angle_deg: f64,
    pub max_range_m: f64,
}

impl Fov {
    /// Sees everything.
    pub const FULL: Fov =
        Fov { heading_deg: 0.0, half_angle_deg: 180.0, max_range_m: f64::INFINITY };

    pub fn contains(&self, p: Position) -> bool {
        let r2 = p[0] * p[0] + p[1] * p[1];
        if r2 > self.max_range_m * self.max_range_m {
            return false;
        }
        if self.half_angle_deg >= 180.0 {
            return true;
        }
        let angle = libm::atan2(p[1], p[0]).to_degrees();
        let mut diff = angle - self.heading_deg;
        while diff > 180.0 {
            diff -= 360.0;
        }
        while diff < -180.0 {
            diff += 360.0;
        }
        libm::fabs(diff) <= self.half_angle_deg
    }
}

/// One sensed object within a snapshot. Camera observations carry the class
/// and a laterally-degraded position; LiDAR observations carry an exact
/// position and no class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub oid: u32,
    pub position: Position,
    pub class: Option<ObjectClass>,
}

/// Everything one modality sensed at one capture instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalitySnapshot {
    pub stream: StreamId,
    pub t_act: TimePoint,
    pub observations: Vec<Observation>,
}

/// Render what `stream` senses at `t_act`. Deterministic in
/// `(world, stream, t_act, scenario_seed)`: camera noise is drawn
/// counter-style per `(seed, stream, t_act, oid)`, so output does not depend
/// on iteration order or call history.
pub fn render_snapshot(
    world: &World,
    stream: StreamId,
    fov: &Fov,
    sigma_cam: f64,
    t_act: TimePoint,
    scenario_seed: u64,
) -> ModalitySnapshot {
    let mut observations = Vec::new();
    for (oid, pos, class) in world.alive_at(t_act) {
        if !fov.contains(pos) {
            continue;
        }
        let obs = match stream.modality {
            Modality::Camera => Observation {
                oid,
                position: degrade_lateral(pos, sigma_cam, stream, t_act, oid, scenario_seed),
                class: Some(class),
            },
            _ => Observation { oid, position: pos, class: None },
        };
        observations.push(obs);
    }
    ModalitySnapshot { stream, t_act, observations }
}

/// Shift `pos` along the direction perpendicular to the line of sight by a
/// truncated-normal draw scaled to `sigma`.
fn degrade_lateral(
    pos: Position,
    sigma: f64,
    stream: StreamId,
    t_act: TimePoint,
    oid: u32,
    seed: u64,
) -> Position {
    if sigma <= 0.0 {
        return pos;
    }
    let mut rng = SimRng::new(hash64(seed, &[
        0xCA11_0B5E,
        stream.index as u64,
        t_act.ns() as u64,
        oid as u64,
    ]));
    let z = rng.truncated_normal(4.0);
    let r = libm::sqrt(pos[0] * pos[0] + pos[1] * pos[1]);
    let lateral = if r > 1e-9 {
        [-pos[1] / r, pos[0] / r]
    } else {
        [1.0, 0.0]
    };
    [pos[0] + z * sigma * lateral[0], pos[1] + z * sigma * lateral[1]]
}

/// How the fusion rule weighs the two modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuseMode {
    /// One detection per LiDAR observation; the camera only contributes a
    /// class label when an observation sits within the gate.
    LidarDominant,
    /// A LiDAR observation becomes a detection only when corroborated by a
    /// camera observation within the gate.
    CameraGated,
}

/// Streams that contributed to a fused detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Supporting {
    pub camera: bool,
    pub lidar: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedDetection {
    pub position: Position,
    pub class: Option<ObjectClass>,
    pub supporting: Supporting,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PerceptionError {
    /// Fusion requires exactly one camera and one LiDAR member.
    MissingModality,
}

impl fmt::Display for PerceptionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerceptionError::MissingModality => {
                write!(f, "fusion requires one camera and one lidar snapshot")
            }
        }
    }
}

/// Fuse one camera and one LiDAR snapshot into detections.
///
/// Pairing is deterministic greedy nearest-first over (distance, lidar oid,
/// camera oid), one-to-one, within `gate` meters.
pub fn fuse(
    camera: &ModalitySnapshot,
    lidar: &ModalitySnapshot,
    mode: FuseMode,
    gate: f64,
) -> Result<Vec<FusedDetection>, PerceptionError> {
    if camera.stream.modality != Modality::Camera || lidar.stream.modality != Modality::Lidar {
        return Err(PerceptionError::MissingModality);
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    let gate2 = gate * gate;
    for (li, lobs) in lidar.observations.iter().enumerate() {
        for (ci, cobs) in camera.observations.iter().enumerate() {
            let d2 = squared_distance(lobs.position, cobs.position);
            if d2 <= gate2 {
                pairs.push((d2, li, ci));
            }
        }
    }
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("distances are finite")
            .then_with(|| lidar.observations[a.1].oid.cmp(&lidar.observations[b.1].oid))
            .then_with(|| camera.observations[a.2].oid.cmp(&camera.observations[b.2].oid))
    });

    let mut lidar_match: Vec<Option<usize>> = alloc::vec![None; lidar.observations.len()];
    let mut camera_used: Vec<bool> = alloc::vec![false; camera.observations.len()];
    for (_, li, ci) in pairs {
        if lidar_match[li].is_none() && !camera_used[ci] {
            lidar_match[li] = Some(ci);
            camera_used[ci] = true;
        }
    }

    let mut detections = Vec::new();
    for (li, lobs) in lidar.observations.iter().enumerate() {
        match (mode, lidar_match[li]) {
            (_, Some(ci)) => detections.push(FusedDetection {
                position: lobs.position,
                class: camera.observations[ci].class,
                supporting: Supporting { camera: true, lidar: true },
            }),
            (FuseMode::LidarDominant, None) => detections.push(FusedDetection {
                position: lobs.position,
                class: None,
                supporting: Supporting { camera: false, lidar: true },
            }),
            (FuseMode::CameraGated, None) => {}
        }
    }
    Ok(detections)
}

/// One tracked hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Track {
    pub tid: u64,
    pub position: Position,
    pub velocity: [f64; 2],
    pub age: u32,
    pub miss_count: u32,
    pub last_update: TimePoint,
    pub class: Option<ObjectClass>,
}

impl Track {
    pub fn predicted_at(&self, t: TimePoint) -> Position {
        let dt = (t - self.last_update).as_secs_f64();
        [self.position[0] + self.velocity[0] * dt, self.position[1] + self.velocity[1] * dt]
    }
}

/// Greedy nearest-neighbor tracker with constant-velocity prediction.
/// Track ids are never reused within a run; a track is dropped once its miss
/// count exceeds the limit.
#[derive(Debug, Clone)]
pub struct Tracker {
    gate: f64,
    max_miss: u32,
    next_tid: u64,
    tracks: Vec<Track>,
}

impl Tracker {
    pub fn new(gate: f64, max_miss: u32) -> Self {
        Self { gate, max_miss, next_tid: 1, tracks: Vec::new() }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Tracks updated with a detection this frame; these are the
    /// hypotheses the tracker reports.
    pub fn fresh_tracks(&self) -> Vec<Track> {
        self.tracks.iter().filter(|t| t.miss_count == 0).copied().collect()
    }

    /// One association step at `t_sys` (nondecreasing across calls).
    pub fn update(&mut self, detections: &[FusedDetection], t_sys: TimePoint) {
        let gate2 = self.gate * self.gate;

        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, track) in self.tracks.iter().enumerate() {
            let pred = track.predicted_at(t_sys);
            for (di, det) in detections.iter().enumerate() {
                let d2 = squared_distance(pred, det.position);
                if d2 <= gate2 {
                    pairs.push((d2, ti, di));
                }
            }
        }
        pairs.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("distances are finite")
                .then_with(|| self.tracks[a.1].tid.cmp(&self.tracks[b.1].tid))
                .then_with(|| a.2.cmp(&b.2))
        });

        let mut track_hit: Vec<Option<usize>> = alloc::vec![None; self.tracks.len()];
        let mut det_used: Vec<bool> = alloc::vec![false; detections.len()];
        for (_, ti, di) in pairs {
            if track_hit[ti].is_none() && !det_used[di] {
                track_hit[ti] = Some(di);
                det_used[di] = true;
            }
        }

        for (ti, track) in self.tracks.iter_mut().enumerate() {
            match track_hit[ti] {
                Some(di) => {
                    let det = &detections[di];
                    let dt = (t_sys - track.last_update).as_secs_f64();
                    if dt > 0.0 {
                        track.velocity = [
                            (det.position[0] - track.position[0]) / dt,
                            (det.position[1] - track.position[1]) / dt,
                        ];
                    }
                    track.position = det.position;
                    track.last_update = t_sys;
                    track.age += 1;
                    track.miss_count = 0;
                    if det.class.is_some() {
                        track.class = det.class;
                    }
                }
                None => track.miss_count += 1,
            }
        }

        let max_miss = self.max_miss;
        self.tracks.retain(|t| t.miss_count <= max_miss);

        for (di, det) in detections.iter().enumerate() {
            if !det_used[di] {
                self.tracks.push(Track {
                    tid: self.next_tid,
                    position: det.position,
                    velocity: [0.0, 0.0],
                    age: 1,
                    miss_count: 0,
                    last_update: t_sys,
                    class: det.class,
                });
                self.next_tid += 1;
            }
        }
    }
}

/// Fused detections plus reported track states at one fusion instant. Benign
/// and attacked runs share this shape.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionOutput {
    pub t_sys: TimePoint,
    pub detections: Vec<FusedDetection>,
    pub tracks: Vec<Track>,
}
