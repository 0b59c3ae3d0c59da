//! Configuration, experiment drivers and artifact writers behind the `ltn`
//! binary.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{reproduce_tables, run, sweep, verify, Outcome};
pub use config::{parse_h, parse_h_list, CaseKind, ExperimentConfig, FileConfig, Overrides};
pub use report::{Report, Status};
