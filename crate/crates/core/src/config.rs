//! Run configuration: one TOML document with `[vehicle]`, `[powertrain]`,
//! `[transmission]`, `[solver]` and `[algorithm]` tables. Keys are the field
//! names of the corresponding structs; every table is optional and falls back
//! to the defaults below.

use std::path::Path;

use lapopt_conic::SolverSettings;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::{PowertrainSpec, TransmissionKind, TransmissionSpec, VehicleSpec};

/// Default ratio sets, found by running [`crate::driver::design_search`] on the
/// bundled circuit with the default vehicle in the energy-limited
/// configuration.
pub const DEFAULT_FGT_RATIO: f64 = 6.6436;
pub const DEFAULT_MGT2_RATIOS: [f64; 2] = [9.4858, 6.6895];
pub const DEFAULT_MGT3_RATIOS: [f64; 3] = [11.0224, 8.6712, 6.4652];
pub const DEFAULT_MGT4_RATIOS: [f64; 4] = [12.4181, 10.3851, 8.4958, 6.3042];
pub const DEFAULT_CVT_RANGE: (f64, f64) = (4.0, 15.3313);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmSettings {
    /// Costate damping factor in (0, 1].
    pub beta: f64,
    pub max_outer_iterations: usize,
    /// Lap-time change below which a repeated gear trajectory counts as
    /// converged, s.
    pub lap_time_tolerance: f64,
    /// Limit-cycle guard: how many times β may be halved.
    pub max_beta_halvings: usize,
    /// Gears whose Hamiltonians lie within this band count as tied, and the
    /// incumbent gear wins, s/m.
    pub tie_tolerance: f64,
    /// Grid spacing used when loading tracks, m.
    pub step_length: f64,
    pub max_exact_steps: usize,
    pub node_budget: usize,
    /// Certified optimality gap for branch and bound, s.
    pub exact_gap: f64,
    /// Design search stops a coordinate pass once it gains less than this, s.
    pub design_tolerance: f64,
    pub ratio_lower: f64,
    pub ratio_upper: f64,
    /// Minimum spacing between adjacent gear ratios in the design search.
    pub ratio_spacing: f64,
}

impl Default for AlgorithmSettings {
    fn default() -> Self {
        AlgorithmSettings {
            beta: 0.5,
            max_outer_iterations: 50,
            lap_time_tolerance: 1e-6,
            max_beta_halvings: 3,
            tie_tolerance: 1e-12,
            step_length: 4.0,
            max_exact_steps: 24,
            node_budget: 1_000_000,
            exact_gap: 1e-6,
            design_tolerance: 1e-4,
            ratio_lower: 3.0,
            ratio_upper: 20.0,
            ratio_spacing: 0.25,
        }
    }
}

impl AlgorithmSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config("algorithm.beta must lie in (0, 1]".into()));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::Config(
                "algorithm.max_outer_iterations must be >= 1".into(),
            ));
        }
        if !(self.step_length > 0.0) {
            return Err(Error::Config(
                "algorithm.step_length must be positive".into(),
            ));
        }
        if !(self.ratio_lower > 0.0 && self.ratio_lower <= self.ratio_upper) {
            return Err(Error::Config(
                "algorithm ratio bounds must satisfy 0 < lower <= upper".into(),
            ));
        }
        if !(self.lap_time_tolerance >= 0.0
            && self.exact_gap >= 0.0
            && self.design_tolerance >= 0.0
            && self.tie_tolerance >= 0.0)
        {
            return Err(Error::Config(
                "algorithm tolerances must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub vehicle: VehicleSpec,
    #[serde(default)]
    pub powertrain: PowertrainSpec,
    #[serde(default = "default_transmission")]
    pub transmission: TransmissionSpec,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub algorithm: AlgorithmSettings,
}

fn default_transmission() -> TransmissionSpec {
    TransmissionSpec::fgt(DEFAULT_FGT_RATIO)
}

impl Default for Config {
    fn default() -> Self {
        Config {
            vehicle: VehicleSpec::default(),
            powertrain: PowertrainSpec::default(),
            transmission: default_transmission(),
            solver: SolverSettings::default(),
            algorithm: AlgorithmSettings::default(),
        }
    }
}

/// Default transmission for a label `fgt`, `cvt`, `mgt1` … `mgt4`.
pub fn preset_transmission(label: &str) -> Result<TransmissionSpec> {
    let t = match label {
        "fgt" => TransmissionSpec::fgt(DEFAULT_FGT_RATIO),
        "cvt" => TransmissionSpec::cvt(DEFAULT_CVT_RANGE.0, DEFAULT_CVT_RANGE.1),
        "mgt1" => TransmissionSpec::mgt(vec![DEFAULT_FGT_RATIO]),
        "mgt2" => TransmissionSpec::mgt(DEFAULT_MGT2_RATIOS.to_vec()),
        "mgt3" => TransmissionSpec::mgt(DEFAULT_MGT3_RATIOS.to_vec()),
        "mgt4" => TransmissionSpec::mgt(DEFAULT_MGT4_RATIOS.to_vec()),
        other => {
            return Err(Error::Config(format!(
                "unknown transmission `{other}` (expected fgt, cvt, mgt1 … mgt4)"
            )))
        }
    };
    Ok(t)
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let tag = |e: Error| match e {
            Error::Validation(m) => Error::Config(m),
            other => other,
        };
        self.vehicle.validate().map_err(tag)?;
        self.powertrain.validate().map_err(tag)?;
        self.transmission.validate().map_err(tag)?;
        self.algorithm.validate()?;
        Ok(())
    }

    /// Copy with a different transmission, keeping everything else.
    pub fn with_transmission(&self, trans: TransmissionSpec) -> Self {
        Config {
            transmission: trans,
            ..self.clone()
        }
    }

    pub fn kind(&self) -> TransmissionKind {
        self.transmission.kind
    }
}
