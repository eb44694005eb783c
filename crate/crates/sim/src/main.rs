use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use misalign_core::sweep::{sweep, SweepDelayKind, SweepSpec, SweepTargets};
use misalign_core::validate;
use misalign_sim::{load_scenario, report, run_to_files, ReportMeta, SimError};

/// Deterministic multi-sensor fusion simulator with temporal-misalignment
/// attacks.
#[derive(Parser)]
#[command(name = "misalign", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, optionally writing trace and report files.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Line-delimited trace output path.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Single-row CSV report output path.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a frame-delay grid over a benign base scenario and emit a
    /// long-format CSV.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 5)]
        k_max: u32,
        #[arg(long, value_enum, default_value_t = DelayArg::Constant)]
        delay: DelayArg,
        #[arg(long, value_enum, default_value_t = TargetsArg::Both)]
        targets: TargetsArg,
        #[arg(long)]
        out: PathBuf,
        /// Override the base scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a scenario file and list every violated field.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DelayArg {
    Constant,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetsArg {
    Camera,
    Lidar,
    Both,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if let SimError::Invalid { issues } = &err {
                for issue in issues {
                    eprintln!("  {issue}");
                }
            }
            if err.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn dispatch() -> Result<(), SimError> {
    match Cli::parse().command {
        Command::Run { scenario, trace, report, seed } => {
            let mut sc = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            let output = run_to_files(&sc, trace.as_deref(), report.as_deref())?;
            let meta = ReportMeta::for_scenario(&sc);
            println!("{}", misalign_sim::REPORT_HEADER);
            println!("{}", report::report_row(&meta, &output.report));
            Ok(())
        }
        Command::Sweep { scenario, k_max, delay, targets, out, seed } => {
            let mut base = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                base.seed = seed;
            }
            let spec = SweepSpec {
                targets: match targets {
                    TargetsArg::Camera => SweepTargets::Camera,
                    TargetsArg::Lidar => SweepTargets::Lidar,
                    TargetsArg::Both => SweepTargets::Both,
                },
                delay: match delay {
                    DelayArg::Constant => SweepDelayKind::Constant,
                    DelayArg::Uniform => SweepDelayKind::Uniform,
                },
                k_max,
            };
            let cells = sweep(&base, &spec).map_err(|e| SimError::Sweep(e.to_string()))?;
            report::write_sweep(&out, &base.name, &spec, &cells)?;
            println!("wrote {} rows to {}", cells.len(), out.display());
            Ok(())
        }
        Command::Validate { scenario } => {
            let sc = load_scenario(&scenario)?;
            let issues = validate(&sc);
            if issues.is_empty() {
                println!("ok: {}", sc.name);
                Ok(())
            } else {
                Err(SimError::Invalid { issues })
            }
        }
    }
}
