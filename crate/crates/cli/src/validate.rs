//! `lapopt validate`: branch and bound vs the iterative algorithm on the
//! bundled section at several grid sizes.
//!
//! `validation.csv` columns:
//! `n_steps,exact_solve_time,exact_section_time,exact_nodes,exact_gap,iterative_solve_time,iterative_section_time,difference_ms`
//! (times in s, `difference_ms` = iterative − exact). A positive `exact_gap`
//! marks a row where the node budget ran out before optimality was certified.
//! Passes (exit 0) iff every row is certified and within
//! [`PASS_THRESHOLD_MS`].

use std::path::{Path, PathBuf};

use clap::Args;
use lapopt_core::exact::{compare_on_section, write_validation_report, ValidationRow};
use lapopt_core::fixtures;

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::{create_out_dir, resolve_config, resolve_transmission, write_file};

pub const PASS_THRESHOLD_MS: f64 = 0.5;
pub const DEFAULT_STEPS: [usize; 6] = [12, 14, 16, 18, 20, 22];
pub const DEFAULT_SECTION: &str = "brake_corner_accel";
pub const DEFAULT_TRANSMISSION: &str = "mgt3";

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_STEPS)]
    pub steps: Vec<usize>,
    #[arg(long, default_value = DEFAULT_SECTION)]
    pub section: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_TRANSMISSION)]
    pub trans: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &ValidateArgs) -> CliResult<()> {
    let (mut config, config_path) = resolve_config(args.config.as_deref())?;
    config.transmission = resolve_transmission(Some(&args.trans), &config)?;
    config.validate()?;
    let mut m = RunManifest::new("validate", config_path.as_deref(), &config, &args.out);
    m.track = Some(args.section.clone());
    m.transmission = Some(config.transmission.label());
    m.arguments.steps = args.steps.clone();
    m.arguments.section = Some(args.section.clone());
    execute(&m, &args.out)
}

fn report(rows: &[ValidationRow]) -> CliResult<String> {
    let mut buf = Vec::new();
    write_validation_report(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("report is ASCII"))
}

pub fn execute(manifest: &RunManifest, out: &Path) -> CliResult<()> {
    let cfg = &manifest.parameters;
    let section = manifest
        .arguments
        .section
        .as_deref()
        .unwrap_or(DEFAULT_SECTION);
    if section != DEFAULT_SECTION {
        return Err(CliError::Input(format!(
            "unknown section `{section}` (available: {DEFAULT_SECTION})"
        )));
    }
    if manifest.arguments.steps.is_empty() {
        return Err(CliError::Input("no section sizes given".into()));
    }
    create_out_dir(out)?;
    let mut m = manifest.clone();
    m.output_dir = out.display().to_string();
    m.write(out)?;

    let mut rows = Vec::new();
    for &n in &manifest.arguments.steps {
        let model = fixtures::section_model(n, &cfg.vehicle, &cfg.powertrain, &cfg.transmission)?;
        let row = compare_on_section(&model, &cfg.powertrain, &cfg.solver, &cfg.algorithm)?;
        println!(
            "{n:>3} steps: exact {:.6} s ({} nodes, {:.1} s), iterative {:.6} s ({:.2} s), difference {:.4} ms",
            row.exact_section_time,
            row.exact_nodes,
            row.exact_solve_time,
            row.iterative_section_time,
            row.iterative_solve_time,
            row.difference_ms()
        );
        rows.push(row);
        // Rewritten after every size so long runs leave partial results.
        write_file(out, "validation.csv", report(&rows)?)?;
    }

    let uncertified: Vec<usize> = rows
        .iter()
        .filter(|r| r.exact_gap > cfg.algorithm.exact_gap)
        .map(|r| r.n_steps)
        .collect();
    if !uncertified.is_empty() {
        return Err(CliError::Unconverged(format!(
            "bound gap > 0: node budget exhausted at {uncertified:?} steps"
        )));
    }
    let failed: Vec<usize> = rows
        .iter()
        .filter(|r| r.difference_ms().abs() > PASS_THRESHOLD_MS)
        .map(|r| r.n_steps)
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Unconverged(format!(
            "iterative result more than {PASS_THRESHOLD_MS} ms from the exact optimum at {failed:?} steps"
        )));
    }
    Ok(())
}
