//! Minimum-lap-time design and gearshift optimization for an electric race
//! car with a fixed-gear, multi-gear or continuously variable transmission.

pub mod config;
pub mod driver;
pub mod error;
pub mod exact;
pub mod fixtures;
pub mod gop;
pub mod model;
pub mod profile;
pub mod solution;
pub mod track;
pub mod transcription;
pub mod vehicle;

pub use config::{preset_transmission, AlgorithmSettings, Config};
pub use error::{Error, Result};
pub use lapopt_conic::SolverSettings;
pub use model::{Boundary, LapModel};
pub use solution::{audit_powers, ContinuousSolution, GearTrajectory, PowerAudit, PowerBreakdown};
pub use track::{load_track, TrackProfile};
pub use vehicle::{
    effective_mass, max_kinetic_energy, PowertrainSpec, TransmissionKind, TransmissionSpec,
    VehicleSpec,
};
