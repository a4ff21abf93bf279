//! Trajectory and summary files.
//!
//! Trajectory CSV: one row per step, columns
//! `step,kinetic_energy,battery_energy,velocity,lethargy,motor_force,brake_front,brake_rear,gearbox_force,battery_force,cvt_ratio,costate_kinetic,costate_battery`
//! (`cvt_ratio` is empty for fixed-ratio transmissions). Numbers use Rust's
//! shortest round-trip formatting, so files are byte-identical across
//! reruns.
//!
//! Summary: a TOML record with the lap time, solver statistics and design
//! ratios.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solution::ContinuousSolution;

pub const TRAJECTORY_COLUMNS: [&str; 13] = [
    "step",
    "kinetic_energy",
    "battery_energy",
    "velocity",
    "lethargy",
    "motor_force",
    "brake_front",
    "brake_rear",
    "gearbox_force",
    "battery_force",
    "cvt_ratio",
    "costate_kinetic",
    "costate_battery",
];

pub fn write_trajectory_csv<W: Write>(sol: &ContinuousSolution, mut w: W) -> io::Result<()> {
    writeln!(w, "{}", TRAJECTORY_COLUMNS.join(","))?;
    for i in 0..sol.n_steps() {
        let ratio = sol
            .cvt_ratio
            .as_ref()
            .map(|r| format!("{:?}", r[i]))
            .unwrap_or_default();
        writeln!(
            w,
            "{i},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{ratio},{:?},{:?}",
            sol.kinetic_energy[i],
            sol.battery_energy[i],
            sol.velocity[i],
            sol.lethargy[i],
            sol.motor_force[i],
            sol.brake_front[i],
            sol.brake_rear[i],
            sol.gearbox_force[i],
            sol.battery_force[i],
            sol.costate_kinetic[i],
            sol.costate_battery[i],
        )?;
    }
    Ok(())
}

/// A parsed trajectory file: column name → values (empty cells are NaN).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TrajectoryTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_trajectory_csv(text: &str, origin: &str) -> Result<TrajectoryTable> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        path: origin.into(),
        line: 1,
        msg: "empty file".into(),
    })?;
    let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns.len() {
            return Err(Error::Parse {
                path: origin.into(),
                line: k + 2,
                msg: format!("expected {} cells, got {}", columns.len(), cells.len()),
            });
        }
        let row = cells
            .iter()
            .map(|c| {
                let c = c.trim();
                if c.is_empty() {
                    Ok(f64::NAN)
                } else {
                    c.parse::<f64>()
                }
            })
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse {
                path: origin.into(),
                line: k + 2,
                msg: e.to_string(),
            })?;
        rows.push(row);
    }
    Ok(TrajectoryTable { columns, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub transmission: String,
    pub lap_time: f64,
    pub n_steps: usize,
    pub step_length: f64,
    pub design_ratios: Vec<f64>,
    pub battery_used: f64,
    pub solver_status: String,
    pub solver_iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    pub converged: bool,
    pub outer_iterations: usize,
    pub wall_time: f64,
}

impl Summary {
    pub fn new(label: &str, sol: &ContinuousSolution) -> Self {
        Summary {
            transmission: label.to_string(),
            lap_time: sol.lap_time,
            n_steps: sol.n_steps(),
            step_length: sol.step_length,
            design_ratios: sol.design_ratios.clone(),
            battery_used: sol.battery_used(),
            solver_status: sol.solver.status.clone(),
            solver_iterations: sol.solver.iterations,
            primal_residual: sol.solver.primal_residual,
            dual_residual: sol.solver.dual_residual,
            duality_gap: sol.solver.duality_gap,
            converged: true,
            outer_iterations: 1,
            wall_time: sol.solver.solve_time,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("summary serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}
