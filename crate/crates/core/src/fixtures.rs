//! Bundled tracks.
//!
//! - `synthetic_circuit`: a 4232 m closed circuit (long straight, hairpin,
//!   mixed corners, chicane, fast sweep), sampled every metre.
//! - `brake_corner_accel`: a 270 m section — 100 m straight, a 30 m-radius
//!   corner with clothoid entry/exit ramps, and a 90 m exit straight.
//!
//! Both are regenerated by `data/generate.py`.

use crate::error::Result;
use crate::model::{Boundary, LapModel};
use crate::track::{parse_samples, CurvatureSamples, TrackProfile};
use crate::vehicle::{dynamic_mass, PowertrainSpec, TransmissionSpec, VehicleSpec};

pub const SYNTHETIC_CIRCUIT: &str = include_str!("../data/synthetic_circuit.csv");
pub const BRAKE_CORNER_ACCEL: &str = include_str!("../data/brake_corner_accel.csv");

/// Section entry speed, m/s.
pub const SECTION_ENTRY_SPEED: f64 = 45.0;

pub fn circuit_samples() -> CurvatureSamples {
    parse_samples(SYNTHETIC_CIRCUIT, "synthetic_circuit").expect("bundled track parses")
}

pub fn section_samples() -> CurvatureSamples {
    parse_samples(BRAKE_CORNER_ACCEL, "brake_corner_accel").expect("bundled track parses")
}

/// The bundled circuit on a grid of roughly `step` metres.
pub fn synthetic_circuit(step: f64) -> TrackProfile {
    circuit_samples()
        .resample("synthetic_circuit", step)
        .expect("valid step")
}

/// The bundled section resampled to exactly `n_steps` steps.
pub fn brake_corner_accel(n_steps: usize) -> Result<TrackProfile> {
    section_samples().resample_steps("brake_corner_accel", n_steps)
}

/// Fixture names accepted by [`named_samples`].
pub const NAMES: [&str; 2] = ["synthetic_circuit", "brake_corner_accel"];

pub fn named_samples(name: &str) -> Option<CurvatureSamples> {
    match name {
        "synthetic_circuit" => Some(circuit_samples()),
        "brake_corner_accel" => Some(section_samples()),
        _ => None,
    }
}

/// Section boundary: fixed entry speed and a battery allotment equal to the
/// lap budget pro-rated by section length.
pub fn section_boundary(
    dynamic_mass: f64,
    lap_budget: f64,
    lap_length: f64,
    section_length: f64,
) -> Boundary {
    Boundary::Section {
        entry_kinetic_energy: 0.5 * dynamic_mass * SECTION_ENTRY_SPEED * SECTION_ENTRY_SPEED,
        battery_allotment: lap_budget * section_length / lap_length,
    }
}

/// The bundled section on `n_steps` steps with its boundary conditions; the
/// battery allotment is the lap budget pro-rated against the bundled circuit.
pub fn section_model(
    n_steps: usize,
    vehicle: &VehicleSpec,
    powertrain: &PowertrainSpec,
    trans: &TransmissionSpec,
) -> Result<LapModel> {
    let track = brake_corner_accel(n_steps)?;
    let boundary = section_boundary(
        dynamic_mass(vehicle, trans),
        powertrain.battery_consumption_limit,
        circuit_samples().length(),
        track.total_length(),
    );
    LapModel::new(&track, vehicle, powertrain, trans, boundary)
}
