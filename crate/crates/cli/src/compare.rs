//! `lapopt compare`: lap times of finished `optimize` runs relative to the
//! FGT run, plus overlaid speed, ratio and transmission-output-power plots.
//!
//! `comparison.csv` columns: `run,transmission,lap_time,delta,delta_percent`
//! (seconds; `delta = lap_time − lap_time_fgt`). Every lap time is recomputed
//! as `Σ lethargy · step_length` from the run's `trajectory.csv` and the step
//! length in its `summary.toml`. Without an FGT run the first run is the
//! reference.

use std::path::{Path, PathBuf};

use clap::Args;
use lapopt_core::transcription::export::{read_trajectory_csv, Summary};
use lapopt_core::{Config, TransmissionKind};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::plot::{Plot, Series};
use crate::{create_out_dir, write_file};

pub const COMPARISON_COLUMNS: &str = "run,transmission,lap_time,delta,delta_percent";

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Output directories of `lapopt optimize`.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &CompareArgs) -> CliResult<()> {
    let mut m = RunManifest::new("compare", None, &Config::default(), &args.out);
    m.arguments.runs = args.runs.iter().map(|p| p.display().to_string()).collect();
    execute(&m, &args.out)
}

/// One finished run, read back from its files.
#[derive(Debug, Clone)]
pub struct RunData {
    pub dir: String,
    pub manifest: RunManifest,
    pub label: String,
    pub kind: TransmissionKind,
    pub step_length: f64,
    pub lap_time: f64,
    pub velocity: Vec<f64>,
    pub output_power: Vec<f64>,
    pub ratio: Vec<f64>,
}

fn read(dir: &Path, name: &str) -> CliResult<String> {
    let p = dir.join(name);
    std::fs::read_to_string(&p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
}

fn column(
    table: &lapopt_core::transcription::export::TrajectoryTable,
    name: &str,
    dir: &str,
) -> CliResult<Vec<f64>> {
    table
        .column(name)
        .ok_or_else(|| CliError::Input(format!("{dir}: trajectory.csv has no `{name}` column")))
}

pub fn load_run(dir: &Path) -> CliResult<RunData> {
    let name = dir.display().to_string();
    let manifest = RunManifest::load_dir(dir)?;
    if manifest.command != "optimize" {
        return Err(CliError::Input(format!("{name}: not an optimize run")));
    }
    let summary = Summary::from_toml(&read(dir, "summary.toml")?)?;
    let table = read_trajectory_csv(
        &read(dir, "trajectory.csv")?,
        &format!("{name}/trajectory.csv"),
    )?;
    let lethargy = column(&table, "lethargy", &name)?;
    let velocity = column(&table, "velocity", &name)?;
    let gearbox = column(&table, "gearbox_force", &name)?;
    let n = lethargy.len();
    let kind = manifest.parameters.transmission.kind;
    let ratio = match kind {
        TransmissionKind::Cvt => column(&table, "cvt_ratio", &name)?,
        TransmissionKind::Fgt => {
            vec![summary.design_ratios.first().copied().unwrap_or(f64::NAN); n]
        }
        TransmissionKind::Mgt => {
            let text = read(dir, "gears.csv")?;
            let mut r = Vec::with_capacity(n);
            for (k, line) in text.lines().skip(1).enumerate() {
                let v = line
                    .rsplit(',')
                    .next()
                    .and_then(|x| x.parse::<f64>().ok())
                    .ok_or_else(|| {
                        CliError::Input(format!("{name}/gears.csv:{}: bad row", k + 2))
                    })?;
                r.push(v);
            }
            r
        }
    };
    if ratio.len() != n {
        return Err(CliError::Input(format!(
            "{name}: gear and trajectory files disagree on the step count"
        )));
    }
    Ok(RunData {
        dir: name,
        label: summary.transmission.clone(),
        kind,
        step_length: summary.step_length,
        lap_time: lethargy.iter().sum::<f64>() * summary.step_length,
        output_power: gearbox
            .iter()
            .zip(&velocity)
            .map(|(f, v)| f * v / 1e3)
            .collect(),
        velocity,
        ratio,
        manifest,
    })
}

fn check_compatible(runs: &[RunData]) -> CliResult<()> {
    let first = &runs[0];
    for r in &runs[1..] {
        if r.manifest.track != first.manifest.track {
            return Err(CliError::Input(format!(
                "{} and {} were run on different tracks",
                first.dir, r.dir
            )));
        }
        if r.velocity.len() != first.velocity.len() || r.step_length != first.step_length {
            return Err(CliError::Input(format!(
                "{} and {} use different grids",
                first.dir, r.dir
            )));
        }
    }
    Ok(())
}

pub fn comparison_table(runs: &[RunData]) -> String {
    let reference = runs
        .iter()
        .find(|r| r.kind == TransmissionKind::Fgt)
        .unwrap_or(&runs[0]);
    let mut s = format!("{COMPARISON_COLUMNS}\n");
    for r in runs {
        let delta = r.lap_time - reference.lap_time;
        s.push_str(&format!(
            "{},{},{:?},{:?},{:?}\n",
            r.dir,
            r.label,
            r.lap_time,
            delta,
            100.0 * delta / reference.lap_time
        ));
    }
    s
}

fn overlay(
    runs: &[RunData],
    title: &str,
    y_label: &str,
    pick: impl Fn(&RunData) -> &[f64],
) -> Plot {
    let mut p = Plot::new(title, "distance, m", y_label);
    for r in runs {
        let pts = pick(r)
            .iter()
            .enumerate()
            .map(|(i, &y)| (i as f64 * r.step_length, y))
            .collect();
        p = p.with(Series::line(format!("{} ({})", r.label, r.dir), pts));
    }
    p
}

pub fn execute(manifest: &RunManifest, out: &Path) -> CliResult<()> {
    if manifest.arguments.runs.is_empty() {
        return Err(CliError::Input("nothing to compare".into()));
    }
    let runs = manifest
        .arguments
        .runs
        .iter()
        .map(|d| load_run(Path::new(d)))
        .collect::<CliResult<Vec<_>>>()?;
    check_compatible(&runs)?;
    if !runs.iter().any(|r| r.kind == TransmissionKind::Fgt) {
        log::warn!("no FGT run given; deltas are relative to {}", runs[0].dir);
    }
    create_out_dir(out)?;
    let mut m = manifest.clone();
    m.output_dir = out.display().to_string();
    m.track = runs[0].manifest.track.clone();
    m.write(out)?;

    let table = comparison_table(&runs);
    write_file(out, "comparison.csv", &table)?;
    write_file(
        out,
        "velocity.svg",
        overlay(&runs, "Speed", "speed, m/s", |r| &r.velocity).to_svg(),
    )?;
    write_file(
        out,
        "ratio.svg",
        overlay(&runs, "Transmission ratio", "ratio, -", |r| &r.ratio).to_svg(),
    )?;
    write_file(
        out,
        "power.svg",
        overlay(&runs, "Transmission output power", "power, kW", |r| {
            &r.output_power
        })
        .to_svg(),
    )?;
    print!("{table}");
    Ok(())
}
