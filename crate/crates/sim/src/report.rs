//! Report CSV: one row per run, fixed column set shared by single runs and
//! sweep grids.

use std::fs;
use std::path::Path;

use misalign_core::adversary::{Capability, DelayModel};
use misalign_core::metrics::MetricsReport;
use misalign_core::pipeline::Modality;
use misalign_core::scenario::Scenario;
use misalign_core::sweep::{SweepCell, SweepDelayKind, SweepSpec, SweepTargets};

use crate::error::SimError;

pub const REPORT_HEADER: &str =
    "scenario,k_cam,k_lidar,delay_kind,mode,mean_abs_offset,precision,recall,f1,mota,idsw";

/// Run identity columns of a report row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportMeta {
    pub scenario: String,
    pub k_cam: u32,
    pub k_lidar: u32,
    pub delay_kind: String,
    /// benign | uni | mul, by the number of streams under attack.
    pub mode: String,
}

impl ReportMeta {
    /// Derive the identity columns from a scenario's attack list.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        let cam = scenario.stream_index_of(Modality::Camera);
        let lidar = scenario.stream_index_of(Modality::Lidar);
        let mut k_cam = 0;
        let mut k_lidar = 0;
        let mut delay_kind = "none".to_string();
        for attack in &scenario.attacks {
            let k = attack.delay.k();
            if k > 0 {
                delay_kind = match attack.delay {
                    DelayModel::Constant { .. } => "constant".into(),
                    DelayModel::Uniform { .. } => "uniform".into(),
                };
            }
            if attack.capability == Capability::TimestampForge {
                if let Some(c) = cam {
                    if attack.targets_stream(c) {
                        k_cam = k_cam.max(k);
                    }
                }
                if let Some(l) = lidar {
                    if attack.targets_stream(l) {
                        k_lidar = k_lidar.max(k);
                    }
                }
            }
        }
        let mode = match scenario.attacked_stream_count() {
            0 => "benign",
            1 => "uni",
            _ => "mul",
        };
        Self { scenario: scenario.name.clone(), k_cam, k_lidar, delay_kind, mode: mode.into() }
    }
}

pub fn report_row(meta: &ReportMeta, report: &MetricsReport) -> String {
    let mota = report.mota_f64().map(|m| m.to_string()).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        meta.scenario,
        meta.k_cam,
        meta.k_lidar,
        meta.delay_kind,
        meta.mode,
        report.mean_abs_offset,
        report.precision,
        report.recall,
        report.f1,
        mota,
        report.idsw
    )
}

pub fn report_to_string(meta: &ReportMeta, report: &MetricsReport) -> String {
    format!("{REPORT_HEADER}\n{}\n", report_row(meta, report))
}

pub fn write_report(path: &Path, meta: &ReportMeta, report: &MetricsReport) -> Result<(), SimError> {
    fs::write(path, report_to_string(meta, report))
        .map_err(|source| SimError::Write { path: path.to_path_buf(), source })
}

/// Long-format CSV over a sweep grid, one row per cell, suitable for heatmap
/// plotting.
pub fn sweep_to_string(scenario_name: &str, spec: &SweepSpec, cells: &[SweepCell]) -> String {
    let delay_kind = match spec.delay {
        SweepDelayKind::Constant => "constant",
        SweepDelayKind::Uniform => "uniform",
    };
    let mode = match spec.targets {
        SweepTargets::Both => "mul",
        _ => "uni",
    };
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for cell in cells {
        let meta = ReportMeta {
            scenario: scenario_name.to_string(),
            k_cam: cell.k_cam,
            k_lidar: cell.k_lidar,
            delay_kind: delay_kind.into(),
            mode: mode.into(),
        };
        out.push_str(&report_row(&meta, &cell.report));
        out.push('\n');
    }
    out
}

pub fn write_sweep(
    path: &Path,
    scenario_name: &str,
    spec: &SweepSpec,
    cells: &[SweepCell],
) -> Result<(), SimError> {
    fs::write(path, sweep_to_string(scenario_name, spec, cells))
        .map_err(|source| SimError::Write { path: path.to_path_buf(), source })
}
