//! Scenario driver for the cr-toeplitz verification kit.
//!
//! A run reads a TOML scenario file ([`config`]), evaluates every requested
//! check by two independent routes ([`run`]) and serializes the per-check
//! records ([`report`]).

pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use config::{load, parse, Check, Config, Overrides, Scenario, Tolerance, PAPER_DEFAULTS};
pub use error::{ConfigError, RunError};
pub use report::{emit_report, CheckRecord, Environment, ExpansionReport, Format, RECORD_FIELDS};
pub use run::{run_scenario, run_scenarios, RunOptions};
