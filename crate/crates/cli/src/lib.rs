//! `lapopt`: run optimizations, compare finished runs and validate the
//! iterative gearshift algorithm against branch and bound.
//!
//! Exit codes: 0 success, 1 configuration/track/argument error, 2 solver
//! failure, 3 outputs written but not trustworthy (no convergence, or a
//! validation bound missed).
//!
//! Configuration: `--config <file>`; without it, `$LAPOPT_CONFIG_DIR/lapopt.toml`
//! if that exists, otherwise built-in defaults.

pub mod compare;
pub mod error;
pub mod manifest;
pub mod optimize;
pub mod plot;
pub mod validate;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use lapopt_core::fixtures;
use lapopt_core::{load_track, preset_transmission, Config, TrackProfile, TransmissionSpec};

pub use error::{CliError, CliResult};
use manifest::RunManifest;

/// Environment variable naming the default configuration directory.
pub const CONFIG_DIR_VAR: &str = "LAPOPT_CONFIG_DIR";
/// File looked up inside [`CONFIG_DIR_VAR`].
pub const DEFAULT_CONFIG_FILE: &str = "lapopt.toml";

#[derive(Debug, Parser)]
#[command(
    name = "lapopt",
    version,
    about = "Minimum-lap-time transmission design and gearshift optimization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize one car on one track.
    Optimize(optimize::OptimizeArgs),
    /// Tabulate and plot finished runs against the FGT run.
    Compare(compare::CompareArgs),
    /// Exact vs iterative gear choice on short sections.
    Validate(validate::ValidateArgs),
    /// Repeat a run from its manifest.
    Rerun {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Optimize(a) => optimize::run(&a),
        Command::Compare(a) => compare::run(&a),
        Command::Validate(a) => validate::run(&a),
        Command::Rerun { manifest, out } => rerun(&manifest, &out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lapopt: {e}");
            e.exit_code()
        }
    }
}

/// The configuration to use and the file it came from.
pub fn resolve_config(path: Option<&Path>) -> CliResult<(Config, Option<PathBuf>)> {
    if let Some(p) = path {
        return Ok((Config::load(p)?, Some(p.to_path_buf())));
    }
    if let Some(dir) = std::env::var_os(CONFIG_DIR_VAR) {
        let p = Path::new(&dir).join(DEFAULT_CONFIG_FILE);
        if p.is_file() {
            return Ok((Config::load(&p)?, Some(p)));
        }
    }
    Ok((Config::default(), None))
}

/// A bundled fixture by name, or a curvature file.
pub fn resolve_track(spec: &str, step: f64) -> CliResult<TrackProfile> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::Input(format!(
            "step must be positive, got {step}"
        )));
    }
    match fixtures::named_samples(spec) {
        Some(samples) => Ok(samples.resample(spec, step)?),
        None => {
            let path = Path::new(spec);
            if !path.is_file() {
                return Err(CliError::Input(format!(
                    "track `{spec}` is neither a file nor a bundled track ({})",
                    fixtures::NAMES.join(", ")
                )));
            }
            Ok(load_track(path, step)?)
        }
    }
}

/// `--trans` preset, else the configured transmission.
pub fn resolve_transmission(label: Option<&str>, config: &Config) -> CliResult<TransmissionSpec> {
    match label {
        Some(l) => Ok(preset_transmission(l)?),
        None => Ok(config.transmission.clone()),
    }
}

pub fn create_out_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Input(format!("{}: {e}", out.display())))
}

pub fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn rerun(manifest_path: &Path, out: &Path) -> CliResult<()> {
    let m = RunManifest::load(manifest_path)?;
    match m.command.as_str() {
        "optimize" => optimize::execute(&m, out),
        "compare" => compare::execute(&m, out),
        "validate" => validate::execute(&m, out),
        other => Err(CliError::Input(format!(
            "unknown command `{other}` in manifest"
        ))),
    }
}
