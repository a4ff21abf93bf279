//! Track curvature profiles on a uniform spatial grid.
//!
//! Input files hold two delimited columns, arc length in metres and signed
//! curvature in 1/m, with an optional header line. Commas, semicolons, tabs
//! and spaces are all accepted as delimiters.

use std::path::Path;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackProfile {
    pub name: String,
    /// Uniform step `Δs` in metres.
    pub step_length: f64,
    /// Curvature at the start of each step, 1/m.
    pub curvature: Vec<f64>,
}

impl TrackProfile {
    pub fn new(name: impl Into<String>, step_length: f64, curvature: Vec<f64>) -> Result<Self> {
        let t = TrackProfile {
            name: name.into(),
            step_length,
            curvature,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_length > 0.0 && self.step_length.is_finite()) {
            return Err(invalid(format!(
                "step length must be positive, got {}",
                self.step_length
            )));
        }
        if self.curvature.len() < 2 {
            return Err(invalid("a track needs at least 2 steps"));
        }
        if let Some(i) = self.curvature.iter().position(|k| !k.is_finite()) {
            return Err(invalid(format!("curvature at step {i} is not finite")));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        self.curvature.len()
    }

    pub fn total_length(&self) -> f64 {
        self.n_steps() as f64 * self.step_length
    }

    /// Arc length at the start of step `i`.
    pub fn position(&self, i: usize) -> f64 {
        i as f64 * self.step_length
    }
}

/// Raw `(arc length, curvature)` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSamples {
    pub arc_length: Vec<f64>,
    pub curvature: Vec<f64>,
}

impl CurvatureSamples {
    pub fn length(&self) -> f64 {
        self.arc_length[self.arc_length.len() - 1] - self.arc_length[0]
    }

    /// Linear interpolation at `s` (clamped to the sampled range).
    pub fn interpolate(&self, s: f64) -> f64 {
        let xs = &self.arc_length;
        let n = xs.len();
        if s <= xs[0] {
            return self.curvature[0];
        }
        if s >= xs[n - 1] {
            return self.curvature[n - 1];
        }
        let hi = xs.partition_point(|&x| x <= s).min(n - 1);
        let lo = hi - 1;
        let t = (s - xs[lo]) / (xs[hi] - xs[lo]);
        self.curvature[lo] + t * (self.curvature[hi] - self.curvature[lo])
    }

    /// Resamples onto `n_steps` uniform steps spanning the whole profile.
    pub fn resample_steps(&self, name: impl Into<String>, n_steps: usize) -> Result<TrackProfile> {
        if n_steps < 2 {
            return Err(invalid("a track needs at least 2 steps"));
        }
        let step = self.length() / n_steps as f64;
        let s0 = self.arc_length[0];
        let curvature = (0..n_steps)
            .map(|i| self.interpolate(s0 + i as f64 * step))
            .collect();
        TrackProfile::new(name, step, curvature)
    }

    /// Resamples with a step as close as possible to `target_step`:
    /// `n_steps = round(length / target_step)` and the step is then
    /// `length / n_steps` so the grid covers the profile exactly.
    pub fn resample(&self, name: impl Into<String>, target_step: f64) -> Result<TrackProfile> {
        if !(target_step > 0.0 && target_step.is_finite()) {
            return Err(invalid(format!(
                "target step must be positive, got {target_step}"
            )));
        }
        let n = (self.length() / target_step).round() as usize;
        self.resample_steps(name, n)
    }
}

fn is_delimiter(c: char) -> bool {
    c == ',' || c == ';' || c.is_whitespace()
}

/// Parses the two-column curvature format. `origin` only labels errors.
pub fn parse_samples(text: &str, origin: &str) -> Result<CurvatureSamples> {
    let mut arc_length = Vec::new();
    let mut curvature = Vec::new();
    let perr = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut seen_data = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(is_delimiter).filter(|f| !f.is_empty()).collect();
        let parsed: Option<(f64, f64)> = match fields.as_slice() {
            [a, b] => a.parse().ok().zip(b.parse().ok()),
            _ => None,
        };
        match parsed {
            Some((s, k)) => {
                if !s.is_finite() || !k.is_finite() {
                    return Err(perr(line_no, "non-finite value".into()));
                }
                if let Some(&prev) = arc_length.last() {
                    if s <= prev {
                        return Err(invalid(format!(
                            "{origin}:{line_no}: arc length {s} does not increase (previous {prev})"
                        )));
                    }
                }
                arc_length.push(s);
                curvature.push(k);
                seen_data = true;
            }
            // A single non-numeric line before any data is a header.
            None if !seen_data && arc_length.is_empty() && idx == first_content_line(text) => {}
            None => {
                return Err(perr(
                    line_no,
                    format!("expected two numeric columns, got `{line}`"),
                ))
            }
        }
    }
    if arc_length.len() < 2 {
        return Err(invalid(format!(
            "{origin}: need at least 2 rows, got {}",
            arc_length.len()
        )));
    }
    Ok(CurvatureSamples {
        arc_length,
        curvature,
    })
}

fn first_content_line(text: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim();
            !l.is_empty() && !l.starts_with('#')
        })
        .unwrap_or(0)
}

/// Reads a curvature file and resamples it to a uniform grid.
pub fn load_track(path: &Path, target_step: f64) -> Result<TrackProfile> {
    let text = std::fs::read_to_string(path)?;
    let origin = path.display().to_string();
    let samples = parse_samples(&text, &origin)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "track".into());
    samples.resample(name, target_step)
}
