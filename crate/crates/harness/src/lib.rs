//! Command-line experiment harness: configuration, seeded parallel runs and
//! CSV/JSON reports over the `conc_lab_core` bounds and oracles.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::Path;

pub use config::{ConfigError, Format, RunConfig, DEFAULT_SEED};
pub use experiments::{run_experiment, Experiment, EXPERIMENTS};
pub use report::{emit_report, ReportRow, Verdict};

/// Builds a [`RunConfig`] for `command` from `--key value` flags; a
/// `--config FILE` flag supplies defaults that the other flags override.
pub fn config_from_flags(
    command: &str,
    flags: &[(String, String)],
) -> Result<RunConfig, ConfigError> {
    let exp = experiments::find(command).ok_or_else(|| ConfigError {
        message: format!("unknown experiment {command:?}"),
        hint: format!(
            "experiments: {}",
            EXPERIMENTS
                .iter()
                .map(|e| e.id)
                .collect::<Vec<_>>()
                .join(", ")
        ),
    })?;
    let file = match flags.iter().rev().find(|(k, _)| k == "config") {
        Some((_, path)) => config::read_config_file(Path::new(path))?,
        None => Vec::new(),
    };
    config::parse_config(command, exp.params, &file, flags)
}

/// Same as [`config_from_flags`] for raw arguments after the experiment id.
pub fn config_from_args(command: &str, args: &[String]) -> Result<RunConfig, ConfigError> {
    config_from_flags(command, &config::split_flags(args)?)
}

/// One line per experiment: id and its bound/oracle pairing.
pub fn experiment_table() -> String {
    let width = EXPERIMENTS.iter().map(|e| e.id.len()).max().unwrap_or(0);
    EXPERIMENTS
        .iter()
        .map(|e| format!("  {:width$}  {}\n", e.id, e.pairing))
        .collect()
}

/// Whether any row should make the run exit nonzero.
pub fn has_failures(rows: &[ReportRow]) -> bool {
    rows.iter().any(|r| r.verdict.is_failure())
}
