//! Sweeps of QAM-MPPM error rates: configuration files, parallel
//! simulation next to the analytic curves, CSV output and gnuplot scripts.
//!
//! The numerics live in [`qam_mppm_core`]; this crate adds files, threads
//! and the command line.

pub mod complexity;
pub mod config;
pub mod plot;
pub mod report;
pub mod run;

pub use config::{parse_config, parse_config_str, ConfigError, Mode, SweepSpec};
pub use report::{read_report, ErrorReport};
pub use run::{run, RunError, RunOptions, StopRule, System};
