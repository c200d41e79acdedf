//! Simulation front end: configuration, sweeps, audits and CSV files.

mod config;
mod report;
mod sweep;

pub use config::{ConfigError, ShapingTarget, SimConfig, SnrGrid};
pub use report::{
    read_sweep_csv, write_audit, write_audit_csv, write_mi, write_mi_csv, write_sweep, write_sweep_csv, CsvOptions,
    ReportError,
};
pub use sweep::{
    audit_distribution, mi_curves, run_point, run_sweep, run_sweep_with, DistributionAudit, MiRecord, SweepRecord,
};
