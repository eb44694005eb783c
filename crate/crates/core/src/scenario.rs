//! Scenario description and validation: the full parameter set of one run,
//! already resolved into domain types. Parsing of the on-disk format lives in
//! the companion crate.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::adversary::{AttackSpec, Capability};
use crate::perception::{Fov, FuseMode, World};
use crate::pipeline::{Modality, StreamId};
use crate::synchronizer::SyncPolicy;
use crate::timebase::{Duration, SkewPpm};

/// One sensor stream: capture grid, clock model, and delivery channel.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    pub id: StreamId,
    pub period: Duration,
    pub phase: Duration,
    pub clock_offset: Duration,
    pub clock_skew_ppm: SkewPpm,
    pub clock_jitter_stddev: Duration,
    pub channel_base_latency: Duration,
    pub channel_jitter_stddev: Duration,
    pub channel_allow_reorder: bool,
    pub fov: Fov,
}

impl StreamConfig {
    /// Plain periodic stream with ideal clock and wire.
    pub fn ideal(index: u32, modality: Modality, period: Duration) -> Self {
        Self {
            id: StreamId { index, modality },
            period,
            phase: Duration::ZERO,
            clock_offset: Duration::ZERO,
            clock_skew_ppm: SkewPpm::new_raw(0, 1),
            clock_jitter_stddev: Duration::ZERO,
            channel_base_latency: Duration::ZERO,
            channel_jitter_stddev: Duration::ZERO,
            channel_allow_reorder: false,
            fov: Fov::FULL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptionParams {
    pub fuse_mode: FuseMode,
    /// Camera-to-LiDAR pairing gate, meters.
    pub gate: f64,
    /// Track association gate, meters.
    pub gate_track: f64,
    /// Tracks are dropped when the miss count exceeds this.
    pub max_miss: u32,
    /// Lateral camera position noise, meters (one sigma).
    pub sigma_cam: f64,
}

impl Default for PerceptionParams {
    fn default() -> Self {
        Self {
            fuse_mode: FuseMode::LidarDominant,
            gate: 2.0,
            gate_track: 3.0,
            max_miss: 2,
            sigma_cam: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricParams {
    /// Center-distance matching radius for detection and tracking scoring,
    /// meters.
    pub match_radius: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self { match_radius: 2.0 }
    }
}

/// Everything a run needs. A scenario plus the tool version fully determines
/// the trace bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub horizon: Duration,
    pub seed: u64,
    pub streams: Vec<StreamConfig>,
    pub sync: SyncPolicy,
    /// Empty for a benign run. Multiple specs allow per-stream delay
    /// parameters; their target sets must not overlap.
    pub attacks: Vec<AttackSpec>,
    pub world: World,
    pub perception: PerceptionParams,
    pub metrics: MetricParams,
}

impl Scenario {
    pub fn is_benign(&self) -> bool {
        self.attacks.is_empty()
    }

    pub fn stream_index_of(&self, modality: Modality) -> Option<u32> {
        self.streams.iter().find(|s| s.id.modality == modality).map(|s| s.id.index)
    }

    /// Sum of distinct attacked streams: 1 target is a unimodal attack,
    /// 2 or more a multimodal one.
    pub fn attacked_stream_count(&self) -> usize {
        let mut targets: Vec<u32> = self.attacks.iter().flat_map(|a| a.targets.iter().copied()).collect();
        targets.sort_unstable();
        targets.dedup();
        targets.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub field: String,
    pub message: String,
}

impl core::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn issue(issues: &mut Vec<ValidationIssue>, field: impl Into<String>, message: impl Into<String>) {
    issues.push(ValidationIssue { field: field.into(), message: message.into() });
}

/// Check every scenario invariant; aggregates all violations instead of
/// failing fast.
pub fn validate(scenario: &Scenario) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();

    if scenario.horizon <= Duration::ZERO {
        issue(&mut issues, "horizon_ns", "horizon must be > 0");
    }
    if scenario.streams.is_empty() {
        issue(&mut issues, "streams", "at least one stream is required");
    }

    for (i, s) in scenario.streams.iter().enumerate() {
        let f = |name: &str| format!("streams[{i}].{name}");
        if s.id.index as usize != i {
            issue(&mut issues, f("index"), format!("expected contiguous index {i}, got {}", s.id.index));
        }
        if s.period <= Duration::ZERO {
            issue(&mut issues, f("period_ns"), "period must be > 0");
        } else if s.phase < Duration::ZERO || s.phase >= s.period {
            issue(&mut issues, f("phase_ns"), "phase must be in [0, period)");
        }
        if s.clock_jitter_stddev < Duration::ZERO {
            issue(&mut issues, f("clock.jitter_stddev_ns"), "jitter stddev must be >= 0");
        }
        if s.channel_base_latency < Duration::ZERO {
            issue(&mut issues, f("channel.base_latency_ns"), "base latency must be >= 0");
        }
        if s.channel_jitter_stddev < Duration::ZERO {
            issue(&mut issues, f("channel.jitter_stddev_ns"), "jitter stddev must be >= 0");
        }
    }

    let cameras = scenario.streams.iter().filter(|s| s.id.modality == Modality::Camera).count();
    let lidars = scenario.streams.iter().filter(|s| s.id.modality == Modality::Lidar).count();
    if cameras != 1 || lidars != 1 {
        issue(
            &mut issues,
            "streams",
            format!("fusion needs exactly one camera and one lidar stream (got {cameras} camera, {lidars} lidar)"),
        );
    }

    if scenario.sync.slop < Duration::ZERO {
        issue(&mut issues, "sync.slop_ns", "slop must be >= 0");
    }
    if scenario.sync.queue_size < 1 {
        issue(&mut issues, "sync.queue_size", "queue size must be >= 1");
    }

    let mut seen_targets: Vec<u32> = Vec::new();
    for (ai, attack) in scenario.attacks.iter().enumerate() {
        let f = |name: &str| format!("attack[{ai}].{name}");
        if attack.targets.is_empty() {
            issue(&mut issues, f("targets"), "attack must target at least one stream");
        }
        for &t in &attack.targets {
            if !scenario.streams.iter().any(|s| s.id.index == t) {
                issue(&mut issues, f("targets"), format!("unknown stream index {t}"));
            }
            if seen_targets.contains(&t) {
                issue(&mut issues, f("targets"), format!("stream {t} targeted by more than one attack"));
            }
            seen_targets.push(t);
        }
        match attack.capability {
            Capability::TimestampForge => {
                if attack.delay.k() > 0 && attack.stamp_offset != Duration::ZERO {
                    issue(
                        &mut issues,
                        f("stamp_offset_ns"),
                        "set either a frame delay or a stamp offset, not both",
                    );
                }
            }
            Capability::ReplayImpersonate => {
                if attack.lead <= Duration::ZERO {
                    issue(&mut issues, f("lead_ns"), "replay lead must be > 0");
                }
                if attack.history_depth < 1 {
                    issue(&mut issues, f("history_depth"), "history depth must be >= 1");
                }
            }
            Capability::ClockDesync => {}
        }
    }

    let mut seen_oids: Vec<u32> = Vec::new();
    for (oi, obj) in scenario.world.objects.iter().enumerate() {
        let f = |name: &str| format!("world.objects[{oi}].{name}");
        if seen_oids.contains(&obj.oid) {
            issue(&mut issues, f("oid"), format!("duplicate oid {}", obj.oid));
        }
        seen_oids.push(obj.oid);
        if obj.spawn >= obj.despawn {
            issue(&mut issues, f("spawn_ns"), "spawn must precede despawn");
        }
        if obj.extent <= 0.0 {
            issue(&mut issues, f("extent"), "extent must be > 0");
        }
        if obj.waypoints.is_empty() {
            issue(&mut issues, f("waypoints"), "at least one waypoint is required");
        }
        for w in obj.waypoints.windows(2) {
            if w[1].t <= w[0].t {
                issue(&mut issues, f("waypoints"), "waypoint times must be strictly increasing");
                break;
            }
        }
    }

    if scenario.perception.gate <= 0.0 {
        issue(&mut issues, "perception.gate_m", "fusion gate must be > 0");
    }
    if scenario.perception.gate_track <= 0.0 {
        issue(&mut issues, "perception.gate_track_m", "track gate must be > 0");
    }
    if scenario.perception.sigma_cam < 0.0 {
        issue(&mut issues, "perception.sigma_cam_m", "camera noise sigma must be >= 0");
    }
    if scenario.metrics.match_radius <= 0.0 {
        issue(&mut issues, "metrics.match_radius_m", "match radius must be > 0");
    }

    issues
}
