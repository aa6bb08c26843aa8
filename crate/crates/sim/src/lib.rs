//! Scenario sweeps, CSV/JSON formats and helpers behind the `qpe` binary.

pub mod records;
pub mod scenario;
pub mod trace;

pub use records::{read_rows, rows, write_rows, SweepRow, SWEEP_HEADER};
pub use scenario::{calibrate_eps, run_sweep, run_trial, ScenarioConfig, ScenarioError, TrialRecord};
