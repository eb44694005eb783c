//! Std-side companion to `misalign-core`: scenario files (TOML), trace
//! (JSON lines) and report (CSV) writers, sweep CSVs, and the pieces the
//! `misalign` binary is built from.

pub mod config;
pub mod error;
pub mod report;
pub mod trace_io;

use std::path::Path;

use misalign_core::engine::RunOutput;
use misalign_core::scenario::Scenario;

pub use config::{load_scenario, parse_scenario_str};
pub use error::SimError;
pub use report::{ReportMeta, REPORT_HEADER};

/// Run a scenario and write the requested artifacts.
pub fn run_to_files(
    scenario: &Scenario,
    trace_path: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<RunOutput, SimError> {
    let output =
        misalign_core::run(scenario).map_err(|issues| SimError::Invalid { issues })?;
    if let Some(path) = trace_path {
        trace_io::write_trace(path, &output.trace)?;
    }
    if let Some(path) = report_path {
        let meta = ReportMeta::for_scenario(scenario);
        report::write_report(path, &meta, &output.report)?;
    }
    Ok(output)
}
