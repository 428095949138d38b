//! Scenario files, the `certify`/`run`/`sweep` commands and their outputs.

mod commands;
mod config;
mod output;

pub use commands::{
    certify_config, cmd_certify, cmd_run, cmd_sweep, error_exit_code, load_config, render_report_text,
    render_summary_text, render_sweep_text, report_json, seed_from_env, to_json, AbortInfo, CertifyOutcome, RunOutcome,
    RunSummary, SweepOptions, SweepReport, SweepRow, EXIT_ABORTED, EXIT_ERROR, EXIT_NOT_CERTIFIED, EXIT_OK, SEED_ENV,
};
pub use config::{parse_config, OutputPaths, ScenarioConfig, DEFAULT_CERT_SAMPLES, DEFAULT_DURATION};
pub use output::{csv_header, trajectory_csv, write_atomic};
