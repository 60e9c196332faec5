use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    version: String,
    command: &'a str,
    config: ExperimentConfig,
    result: &'a T,
}

/// Writes `result` wrapped with the schema version, the library version and
/// the resolved config. The output directory is left out of the embedded
/// config so reports do not depend on where they were written.
pub fn write_json<T: Serialize>(
    dir: &Path,
    name: &str,
    command: &str,
    cfg: &ExperimentConfig,
    result: &T,
) -> Result<(), CliError> {
    let mut config = cfg.clone();
    config.output_dir = None;
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        version: format!("hriesz {}", hriesz::VERSION),
        command,
        config,
        result,
    };
    let mut text =
        serde_json::to_string_pretty(&envelope).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

/// Writes a CSV file; floats use Rust's shortest round-trip formatting.
pub fn write_csv(
    dir: &Path,
    name: &str,
    header: &[String],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let mut out = Vec::new();
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    fs::write(dir.join(name), out)?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}
