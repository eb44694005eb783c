//! Scenario file schema and loading.
//!
//! Scenarios are a single TOML document. Times are integer nanoseconds
//! (`*_ns` keys), distances are meters (`*_m` keys), delays are whole frames.
//! See the shipped files under `scenarios/` for complete examples.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use misalign_core::adversary::{AttackSpec, Capability, DelayModel};
use misalign_core::perception::{Fov, FuseMode, ObjectClass, Waypoint, World, WorldObject};
use misalign_core::pipeline::{Modality, StreamId};
use misalign_core::scenario::{MetricParams, PerceptionParams, Scenario, StreamConfig};
use misalign_core::synchronizer::{SyncMode, SyncPolicy};
use misalign_core::timebase::{Duration, SkewPpm, TimePoint};

use crate::error::SimError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub horizon_ns: i64,
    pub seed: u64,
    pub streams: Vec<StreamFile>,
    pub sync: SyncFile,
    pub attack: Option<AttackFile>,
    #[serde(default)]
    pub world: WorldFile,
    #[serde(default)]
    pub perception: PerceptionFile,
    #[serde(default)]
    pub metrics: MetricsFile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamFile {
    /// Defaults to the position in the `streams` array.
    pub index: Option<u32>,
    pub modality: String,
    pub period_ns: i64,
    #[serde(default)]
    pub phase_ns: i64,
    #[serde(default)]
    pub clock: ClockFile,
    #[serde(default)]
    pub channel: ChannelFile,
    pub fov: Option<FovFile>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockFile {
    #[serde(default)]
    pub offset_ns: i64,
    #[serde(default)]
    pub skew_ppm: f64,
    #[serde(default)]
    pub jitter_stddev_ns: i64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    #[serde(default)]
    pub base_latency_ns: i64,
    #[serde(default)]
    pub jitter_stddev_ns: i64,
    #[serde(default)]
    pub allow_reorder: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FovFile {
    pub heading_deg: f64,
    pub half_angle_deg: f64,
    pub range_m: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncFile {
    #[serde(default = "default_sync_mode")]
    pub mode: String,
    pub slop_ns: i64,
    #[serde(default = "default_queue_size")]
    pub queue_size: usize,
}

fn default_sync_mode() -> String {
    "approximate".into()
}

fn default_queue_size() -> usize {
    8
}

/// Attack target: a stream index or a modality name (when unambiguous).
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum TargetRef {
    Index(u32),
    Name(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackFile {
    pub capability: String,
    pub targets: Vec<TargetRef>,
    #[serde(default)]
    pub start_ns: i64,
    #[serde(default)]
    pub delay: DelayFile,
    #[serde(default)]
    pub stamp_offset_ns: i64,
    #[serde(default = "default_lead_ns")]
    pub lead_ns: i64,
    #[serde(default = "default_history_depth")]
    pub history_depth: usize,
    #[serde(default)]
    pub clock_offset_ns: i64,
    #[serde(default)]
    pub clock_skew_ppm: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_lead_ns() -> i64 {
    5_000_000
}

fn default_history_depth() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayFile {
    pub kind: String,
    #[serde(default)]
    pub k: u32,
}

impl Default for DelayFile {
    fn default() -> Self {
        Self { kind: "constant".into(), k: 0 }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldFile {
    #[serde(default)]
    pub objects: Vec<ObjectFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectFile {
    pub oid: u32,
    pub class: String,
    #[serde(default = "default_extent")]
    pub extent: f64,
    pub spawn_ns: i64,
    pub despawn_ns: i64,
    pub waypoints: Vec<WaypointFile>,
}

fn default_extent() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointFile {
    pub t_ns: i64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionFile {
    #[serde(default = "default_fuse_mode")]
    pub fuse_mode: String,
    #[serde(default = "default_gate")]
    pub gate_m: f64,
    #[serde(default = "default_gate_track")]
    pub gate_track_m: f64,
    #[serde(default = "default_max_miss")]
    pub max_miss: u32,
    #[serde(default = "default_sigma_cam")]
    pub sigma_cam_m: f64,
}

impl Default for PerceptionFile {
    fn default() -> Self {
        Self {
            fuse_mode: default_fuse_mode(),
            gate_m: default_gate(),
            gate_track_m: default_gate_track(),
            max_miss: default_max_miss(),
            sigma_cam_m: default_sigma_cam(),
        }
    }
}

fn default_fuse_mode() -> String {
    "lidar_dominant".into()
}

fn default_gate() -> f64 {
    2.0
}

fn default_gate_track() -> f64 {
    3.0
}

fn default_max_miss() -> u32 {
    2
}

fn default_sigma_cam() -> f64 {
    0.3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsFile {
    #[serde(default = "default_match_radius")]
    pub match_radius_m: f64,
}

impl Default for MetricsFile {
    fn default() -> Self {
        Self { match_radius_m: default_match_radius() }
    }
}

fn default_match_radius() -> f64 {
    2.0
}

/// Read and resolve a scenario file. Schema problems carry the offending
/// field name; semantic invariants are the run-time validator's job.
pub fn load_scenario(path: &Path) -> Result<Scenario, SimError> {
    let text = fs::read_to_string(path)
        .map_err(|source| SimError::Read { path: path.to_path_buf(), source })?;
    let file: ScenarioFile = toml::from_str(&text)
        .map_err(|source| SimError::Parse { path: path.to_path_buf(), source: Box::new(source) })?;
    let fallback_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    resolve(file, fallback_name)
}

pub fn parse_scenario_str(text: &str, name: &str) -> Result<Scenario, SimError> {
    let file: ScenarioFile = toml::from_str(text)
        .map_err(|source| SimError::Parse { path: name.into(), source: Box::new(source) })?;
    resolve(file, name.to_string())
}

fn resolve(file: ScenarioFile, fallback_name: String) -> Result<Scenario, SimError> {
    let streams: Vec<StreamConfig> = file
        .streams
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(StreamConfig {
                id: StreamId {
                    index: s.index.unwrap_or(i as u32),
                    modality: parse_modality(&s.modality, i)?,
                },
                period: Duration::from_ns(s.period_ns),
                phase: Duration::from_ns(s.phase_ns),
                clock_offset: Duration::from_ns(s.clock.offset_ns),
                clock_skew_ppm: ppm_to_ratio(s.clock.skew_ppm),
                clock_jitter_stddev: Duration::from_ns(s.clock.jitter_stddev_ns),
                channel_base_latency: Duration::from_ns(s.channel.base_latency_ns),
                channel_jitter_stddev: Duration::from_ns(s.channel.jitter_stddev_ns),
                channel_allow_reorder: s.channel.allow_reorder,
                fov: match &s.fov {
                    None => Fov::FULL,
                    Some(f) => Fov {
                        heading_deg: f.heading_deg,
                        half_angle_deg: f.half_angle_deg,
                        max_range_m: f.range_m,
                    },
                },
            })
        })
        .collect::<Result<_, SimError>>()?;

    let attacks = match &file.attack {
        None => Vec::new(),
        Some(a) => vec![resolve_attack(a, &streams)?],
    };

    let world = World {
        objects: file
            .world
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| {
                Ok(WorldObject {
                    oid: o.oid,
                    class: parse_class(&o.class, i)?,
                    waypoints: o
                        .waypoints
                        .iter()
                        .map(|w| Waypoint { t: TimePoint::from_ns(w.t_ns), x: w.x, y: w.y })
                        .collect(),
                    extent: o.extent,
                    spawn: TimePoint::from_ns(o.spawn_ns),
                    despawn: TimePoint::from_ns(o.despawn_ns),
                })
            })
            .collect::<Result<_, SimError>>()?,
    };

    Ok(Scenario {
        name: file.name.unwrap_or(fallback_name),
        horizon: Duration::from_ns(file.horizon_ns),
        seed: file.seed,
        streams,
        sync: SyncPolicy {
            mode: match file.sync.mode.as_str() {
                "exact" => SyncMode::Exact,
                "approximate" => SyncMode::Approximate,
                other => {
                    return Err(SimError::schema(
                        "sync.mode",
                        format!("unknown mode '{other}' (expected exact|approximate)"),
                    ))
                }
            },
            slop: Duration::from_ns(file.sync.slop_ns),
            queue_size: file.sync.queue_size,
        },
        attacks,
        world,
        perception: PerceptionParams {
            fuse_mode: match file.perception.fuse_mode.as_str() {
                "lidar_dominant" => FuseMode::LidarDominant,
                "camera_gated" => FuseMode::CameraGated,
                other => {
                    return Err(SimError::schema(
                        "perception.fuse_mode",
                        format!("unknown mode '{other}' (expected lidar_dominant|camera_gated)"),
                    ))
                }
            },
            gate: file.perception.gate_m,
            gate_track: file.perception.gate_track_m,
            max_miss: file.perception.max_miss,
            sigma_cam: file.perception.sigma_cam_m,
        },
        metrics: MetricParams { match_radius: file.metrics.match_radius_m },
    })
}

fn resolve_attack(a: &AttackFile, streams: &[StreamConfig]) -> Result<AttackSpec, SimError> {
    let capability = match a.capability.as_str() {
        "clock_desync" => Capability::ClockDesync,
        "timestamp_forge" => Capability::TimestampForge,
        "replay_impersonate" => Capability::ReplayImpersonate,
        other => {
            return Err(SimError::schema(
                "attack.capability",
                format!("unknown capability '{other}' (expected clock_desync|timestamp_forge|replay_impersonate)"),
            ))
        }
    };
    let delay = match a.delay.kind.as_str() {
        "constant" => DelayModel::Constant { k: a.delay.k },
        "uniform" => DelayModel::Uniform { k: a.delay.k },
        other => {
            return Err(SimError::schema(
                "attack.delay.kind",
                format!("unknown delay kind '{other}' (expected constant|uniform)"),
            ))
        }
    };
    let mut targets = Vec::new();
    for (i, t) in a.targets.iter().enumerate() {
        let field = format!("attack.targets[{i}]");
        match t {
            TargetRef::Index(idx) => targets.push(*idx),
            TargetRef::Name(name) => {
                let modality = parse_modality(name, i)
                    .map_err(|_| SimError::schema(&field, format!("unknown modality '{name}'")))?;
                let matching: Vec<u32> = streams
                    .iter()
                    .filter(|s| s.id.modality == modality)
                    .map(|s| s.id.index)
                    .collect();
                match matching.as_slice() {
                    [one] => targets.push(*one),
                    [] => return Err(SimError::schema(&field, format!("no stream with modality '{name}'"))),
                    _ => {
                        return Err(SimError::schema(
                            &field,
                            format!("modality '{name}' is ambiguous; use a stream index"),
                        ))
                    }
                }
            }
        }
    }
    Ok(AttackSpec {
        targets,
        capability,
        delay,
        stamp_offset: Duration::from_ns(a.stamp_offset_ns),
        lead: Duration::from_ns(a.lead_ns),
        history_depth: a.history_depth,
        start_time: TimePoint::from_ns(a.start_ns),
        clock_offset: Duration::from_ns(a.clock_offset_ns),
        clock_skew_ppm: ppm_to_ratio(a.clock_skew_ppm),
        seed: a.seed,
    })
}

fn parse_modality(s: &str, stream_index: usize) -> Result<Modality, SimError> {
    match s {
        "camera" => Ok(Modality::Camera),
        "lidar" => Ok(Modality::Lidar),
        "other" => Ok(Modality::Other),
        other => Err(SimError::schema(
            format!("streams[{stream_index}].modality"),
            format!("unknown modality '{other}' (expected camera|lidar|other)"),
        )),
    }
}

fn parse_class(s: &str, object_index: usize) -> Result<ObjectClass, SimError> {
    match s {
        "car" => Ok(ObjectClass::Car),
        "pedestrian" => Ok(ObjectClass::Pedestrian),
        "cyclist" => Ok(ObjectClass::Cyclist),
        other => Err(SimError::schema(
            format!("world.objects[{object_index}].class"),
            format!("unknown class '{other}' (expected car|pedestrian|cyclist)"),
        )),
    }
}

/// Fractional ppm values are carried exactly as micro-ppm rationals.
fn ppm_to_ratio(ppm: f64) -> SkewPpm {
    SkewPpm::new((ppm * 1e6).round() as i64, 1_000_000)
}
