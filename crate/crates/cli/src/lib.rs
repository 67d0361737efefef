//! Experiment runner behind the `cvcompile` binary: TOML configs and named
//! presets in, a JSON header plus CSV rows out.

pub mod config;
pub mod error;
pub mod record;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{preset, preset_names, CommandKind, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use record::{read_record, Cell, ExperimentRecord, Header};
pub use run::run;

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub cutoff: Option<usize>,
    pub shots: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Loads the config for `command` from a file, a preset, or (verify only)
/// defaults, then applies `overrides`.
pub fn load_config(
    command: CommandKind,
    path: Option<&Path>,
    preset_name: Option<&str>,
    overrides: &Overrides,
) -> CliResult<ExperimentConfig> {
    let mut config = match (path, preset_name) {
        (Some(_), Some(_)) => return Err(CliError::Config("give --config or --preset, not both".into())),
        (Some(p), None) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) if command == CommandKind::Verify => ExperimentConfig {
            command,
            seed: None,
            cutoff: None,
            shots: None,
            out: None,
            compile: None,
            nfl: None,
            landscape: None,
            verify: None,
        },
        (None, None) => return Err(CliError::Config(format!("{} needs --config or --preset", command.name()))),
    };
    if config.command != command {
        return Err(CliError::Config(format!(
            "config is for `{}` but `{}` was invoked",
            config.command.name(),
            command.name()
        )));
    }
    if overrides.seed.is_some() {
        config.seed = overrides.seed;
    }
    if overrides.cutoff.is_some() {
        config.cutoff = overrides.cutoff;
    }
    if overrides.shots.is_some() {
        config.shots = overrides.shots;
    }
    if overrides.out.is_some() {
        config.out = overrides.out.clone();
    }
    Ok(config)
}

/// Validates, applies the size guard, runs, and writes the record to
/// `config.out` (stdout when unset).
pub fn execute(config: &ExperimentConfig, allow_large: bool) -> CliResult<ExperimentRecord> {
    config.check_runnable(allow_large)?;
    let record = run(config)?;
    match &config.out {
        Some(path) => record.write(std::io::BufWriter::new(std::fs::File::create(path)?))?,
        None => record.write(std::io::stdout().lock())?,
    }
    Ok(record)
}
