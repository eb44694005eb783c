//! Delay-grid sweeps: rerun a benign base scenario under a grid of
//! frame-delay attacks on one or both modalities. Each cell gets an
//! independently derived seed so cells can be re-run in any order.

use alloc::vec::Vec;
use core::fmt;

use crate::adversary::{AttackSpec, Capability, DelayModel};
use crate::engine::{run, RunOutput};
use crate::metrics::MetricsReport;
use crate::pipeline::Modality;
use crate::rng::hash64;
use crate::scenario::{Scenario, ValidationIssue};
use crate::timebase::{Duration, SkewPpm, TimePoint};

const SEED_TAG_SWEEP: u64 = 0x44;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepTargets {
    Camera,
    Lidar,
    Both,
}

impl fmt::Display for SweepTargets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepTargets::Camera => "camera",
            SweepTargets::Lidar => "lidar",
            SweepTargets::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDelayKind {
    Constant,
    Uniform,
}

impl fmt::Display for SweepDelayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepDelayKind::Constant => "constant",
            SweepDelayKind::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepSpec {
    pub targets: SweepTargets,
    pub delay: SweepDelayKind,
    pub k_max: u32,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { targets: SweepTargets::Both, delay: SweepDelayKind::Constant, k_max: 5 }
    }
}

/// One grid cell's scores. `k_cam`/`k_lidar` are zero on the axis a
/// single-modality sweep leaves untouched.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub k_cam: u32,
    pub k_lidar: u32,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepError {
    /// The base scenario must be benign; cells add their own attacks.
    BaseNotBenign,
    BaseInvalid(Vec<ValidationIssue>),
}

impl fmt::Display for SweepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepError::BaseNotBenign => write!(f, "sweep base scenario must be benign"),
            SweepError::BaseInvalid(issues) => write!(f, "invalid base scenario ({} issues)", issues.len()),
        }
    }
}

/// Seed for one grid cell: a stable hash of the base seed and the cell
/// coordinates.
pub fn cell_seed(base_seed: u64, k_cam: u32, k_lidar: u32) -> u64 {
    hash64(base_seed, &[SEED_TAG_SWEEP, k_cam as u64, k_lidar as u64])
}

/// The cell coordinates a sweep visits, in row-major emission order.
pub fn grid(spec: &SweepSpec) -> Vec<(u32, u32)> {
    let ks = 0..=spec.k_max;
    match spec.targets {
        SweepTargets::Camera => ks.map(|k| (k, 0)).collect(),
        SweepTargets::Lidar => ks.map(|k| (0, k)).collect(),
        SweepTargets::Both => {
            let mut cells = Vec::new();
            for k_cam in 0..=spec.k_max {
                for k_lidar in 0..=spec.k_max {
                    cells.push((k_cam, k_lidar));
                }
            }
            cells
        }
    }
}

/// Build the scenario for one cell: base plus per-modality stale-content
/// delay attacks with the cell's derived seed.
pub fn cell_scenario(base: &Scenario, spec: &SweepSpec, k_cam: u32, k_lidar: u32) -> Scenario {
    let delay = |k: u32| match spec.delay {
        SweepDelayKind::Constant => DelayModel::Constant { k },
        SweepDelayKind::Uniform => DelayModel::Uniform { k },
    };
    let attack = |target: u32, k: u32| AttackSpec {
        targets: alloc::vec![target],
        capability: Capability::TimestampForge,
        delay: delay(k),
        stamp_offset: Duration::ZERO,
        lead: Duration::from_millis(5),
        history_depth: 1,
        start_time: TimePoint::EPOCH,
        clock_offset: Duration::ZERO,
        clock_skew_ppm: SkewPpm::new_raw(0, 1),
        seed: 0,
    };

    let mut scenario = base.clone();
    scenario.seed = cell_seed(base.seed, k_cam, k_lidar);
    let cam = base.stream_index_of(Modality::Camera).expect("validated");
    let lidar = base.stream_index_of(Modality::Lidar).expect("validated");
    scenario.attacks = match spec.targets {
        SweepTargets::Camera => alloc::vec![attack(cam, k_cam)],
        SweepTargets::Lidar => alloc::vec![attack(lidar, k_lidar)],
        SweepTargets::Both => alloc::vec![attack(cam, k_cam), attack(lidar, k_lidar)],
    };
    scenario
}

/// Run the whole grid. Cells are independent: each derives its own seed and
/// rebuilds its scenario from the base.
pub fn sweep(base: &Scenario, spec: &SweepSpec) -> Result<Vec<SweepCell>, SweepError> {
    if !base.is_benign() {
        return Err(SweepError::BaseNotBenign);
    }
    let issues = crate::scenario::validate(base);
    if !issues.is_empty() {
        return Err(SweepError::BaseInvalid(issues));
    }
    let mut cells = Vec::new();
    for (k_cam, k_lidar) in grid(spec) {
        let scenario = cell_scenario(base, spec, k_cam, k_lidar);
        let RunOutput { report, .. } = run(&scenario).expect("cell scenario stays valid");
        cells.push(SweepCell { k_cam, k_lidar, report });
    }
    Ok(cells)
}
