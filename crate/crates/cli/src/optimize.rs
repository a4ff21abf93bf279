//! `lapopt optimize`.
//!
//! Output directory:
//! - `manifest.toml`
//! - `trajectory.csv` (columns as in the core trajectory export)
//! - `summary.toml`: lap time, solver statistics, design ratios, convergence
//! - `velocity.svg`: speed over distance
//! - MGT only: `trace.csv` (iteration trace), `gears.csv`
//!   (`step,gear,ratio`, gears 1-based), `gear_map.csv`
//!   (`step,gear,em_speed,em_torque` in rad/s and N·m) and `gear_map.svg`
//! - with `--design-search`: `design.csv` (`evaluation,ratio_1,…,ratio_n,lap_time`)

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use lapopt_core::driver::{design_search, write_trace_csv, Problem, RunOutcome};
use lapopt_core::transcription::export::{write_trajectory_csv, Summary};
use lapopt_core::{Boundary, GearTrajectory, TransmissionKind, TransmissionSpec};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::plot::{Plot, Series};
use crate::{create_out_dir, resolve_config, resolve_track, resolve_transmission, write_file};

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    /// Curvature file, or a bundled track name.
    #[arg(long)]
    pub track: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// fgt, cvt, mgt1 … mgt4; defaults to the configured transmission.
    #[arg(long)]
    pub trans: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also optimize the gear ratios.
    #[arg(long)]
    pub design_search: bool,
    /// Grid spacing in metres; defaults to `algorithm.step_length`.
    #[arg(long)]
    pub step: Option<f64>,
}

pub fn run(args: &OptimizeArgs) -> CliResult<()> {
    let (mut config, config_path) = resolve_config(args.config.as_deref())?;
    config.transmission = resolve_transmission(args.trans.as_deref(), &config)?;
    config.validate()?;
    let mut m = RunManifest::new("optimize", config_path.as_deref(), &config, &args.out);
    m.track = Some(args.track.clone());
    m.transmission = Some(config.transmission.label());
    m.arguments.step = Some(args.step.unwrap_or(config.algorithm.step_length));
    m.arguments.design_search = args.design_search;
    execute(&m, &args.out)
}

fn gears_csv(trans: &TransmissionSpec, gears: &GearTrajectory) -> String {
    let mut s = String::from("step,gear,ratio\n");
    for (i, &j) in gears.active_gear.iter().enumerate() {
        s.push_str(&format!("{i},{},{:?}\n", j + 1, trans.ratios[j]));
    }
    s
}

/// Machine operating points per step: `ω = v·γ/r`, `τ = F·r/γ`.
fn gear_map(trans: &TransmissionSpec, outcome: &RunOutcome, wheel_radius: f64) -> (String, Plot) {
    let sol = &outcome.solution;
    let gears = outcome
        .gears
        .as_ref()
        .expect("gear map needs a gear trajectory");
    let mut csv = String::from("step,gear,em_speed,em_torque\n");
    let mut per_gear = vec![Vec::new(); trans.n_gear];
    for (i, &j) in gears.active_gear.iter().enumerate() {
        let g = trans.ratios[j];
        let omega = sol.velocity[i] * g / wheel_radius;
        let torque = sol.motor_force[i] * wheel_radius / g;
        csv.push_str(&format!("{i},{},{omega:?},{torque:?}\n", j + 1));
        per_gear[j].push((omega, torque));
    }
    let mut plot = Plot::new(
        "Machine operating points",
        "machine speed, rad/s",
        "machine torque, N·m",
    );
    for (j, pts) in per_gear.into_iter().enumerate() {
        plot = plot.with(Series::points(
            format!("gear {} ({:.2})", j + 1, trans.ratios[j]),
            pts,
        ));
    }
    (csv, plot)
}

pub fn execute(manifest: &RunManifest, out: &Path) -> CliResult<()> {
    let started = Instant::now();
    let cfg = &manifest.parameters;
    let track_spec = manifest
        .track
        .as_deref()
        .ok_or_else(|| CliError::Input("manifest has no track".into()))?;
    let step = manifest.arguments.step.unwrap_or(cfg.algorithm.step_length);
    let track = resolve_track(track_spec, step)?;
    create_out_dir(out)?;
    let mut m = manifest.clone();
    m.output_dir = out.display().to_string();
    m.write(out)?;

    let problem = Problem {
        track: &track,
        vehicle: &cfg.vehicle,
        powertrain: &cfg.powertrain,
        boundary: Boundary::Lap,
        solver: &cfg.solver,
        algorithm: &cfg.algorithm,
    };
    let (trans, outcome) = if manifest.arguments.design_search {
        let d = design_search(&problem, &cfg.transmission)?;
        let mut csv = String::from("evaluation");
        for k in 1..=cfg.transmission.design_ratios().len() {
            csv.push_str(&format!(",ratio_{k}"));
        }
        csv.push_str(",lap_time\n");
        for (k, (design, t)) in d.evaluations.iter().enumerate() {
            csv.push_str(&k.to_string());
            for r in design {
                csv.push_str(&format!(",{r:?}"));
            }
            csv.push_str(&format!(",{t:?}\n"));
        }
        write_file(out, "design.csv", csv)?;
        (d.transmission, d.outcome)
    } else {
        (cfg.transmission.clone(), problem.run(&cfg.transmission)?)
    };

    let sol = &outcome.solution;
    let mut traj = Vec::new();
    write_trajectory_csv(sol, &mut traj)?;
    write_file(out, "trajectory.csv", traj)?;
    let mut summary = Summary::new(&trans.label(), sol);
    summary.design_ratios = trans.design_ratios();
    summary.converged = outcome.converged;
    summary.outer_iterations = outcome.records.len().max(1);
    summary.wall_time = started.elapsed().as_secs_f64();
    write_file(out, "summary.toml", summary.to_toml())?;

    let distance: Vec<f64> = (0..sol.n_steps()).map(|i| track.position(i)).collect();
    let speed = Plot::new(
        format!("{} speed", trans.label()),
        "distance, m",
        "speed, m/s",
    )
    .with(Series::line(
        trans.label(),
        distance
            .iter()
            .copied()
            .zip(sol.velocity.iter().copied())
            .collect(),
    ));
    write_file(out, "velocity.svg", speed.to_svg())?;

    if trans.kind == TransmissionKind::Mgt {
        let mut trace = Vec::new();
        write_trace_csv(&outcome.records, &mut trace)?;
        write_file(out, "trace.csv", trace)?;
        let gears = outcome.gears.as_ref().expect("MGT runs return gears");
        write_file(out, "gears.csv", gears_csv(&trans, gears))?;
        let (csv, plot) = gear_map(&trans, &outcome, cfg.vehicle.wheel_radius);
        write_file(out, "gear_map.csv", csv)?;
        write_file(out, "gear_map.svg", plot.to_svg())?;
    }

    println!(
        "{}: lap time {:.4} s, design {:?}, {}",
        trans.label(),
        sol.lap_time,
        trans.design_ratios(),
        if outcome.converged {
            "converged"
        } else {
            "NOT converged"
        }
    );
    if !outcome.converged {
        return Err(CliError::Unconverged(format!(
            "the iterative algorithm did not converge in {} iterations; best incumbent written to {}",
            outcome.records.len(),
            out.display()
        )));
    }
    Ok(())
}
