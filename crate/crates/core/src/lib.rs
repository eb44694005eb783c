//! Deterministic simulation primitives for a timestamped multi-sensor fusion
//! pipeline and the temporal-misalignment attacks that target it.
//!
//! The crate is `no_std` (with `alloc`): everything in here is pure
//! computation over integer-nanosecond time, seeded deterministic randomness,
//! and plain collections. File formats, the CLI, and anything that touches an
//! operating system live in the companion `misalign-sim` crate.
//!
//! Module map:
//! - [`timebase`]: simulation time, per-device clocks, clock-sync corruption.
//! - [`pipeline`]: periodic capture, timestamping, latency channels.
//! - [`synchronizer`]: timestamp-based stream alignment (the attacked component).
//! - [`adversary`]: delay schedules, stamp forging, replay impersonation.
//! - [`perception`]: synthetic world, rule-based fusion, toy tracker.
//! - [`metrics`]: detection scoring, CLEAR-MOT accounting, pairing stats.
//! - [`scenario`], [`engine`], [`sweep`], [`trace`]: config model, the
//!   discrete-event loop, delay-grid sweeps, and trace records.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adversary;
pub mod engine;
pub mod metrics;
pub mod perception;
pub mod pipeline;
pub mod rng;
pub mod scenario;
pub mod sweep;
pub mod synchronizer;
pub mod timebase;
pub mod trace;

pub use engine::{run, RunOutput};
pub use scenario::{validate, Scenario, ValidationIssue};
pub use timebase::{Duration, TimePoint};
