//! Envelope function library and cyclicity utilities.
//!
//! Every built-in shape is evaluated on a uniform grid and then rescaled by a
//! single multiplicative constant so its trapezoid integral hits π exactly at
//! grid level. The shape itself is a free design choice; only the cumulative
//! interaction matters for the gate.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::core::{EnvelopeProfile, DEFAULT_CYCLICITY_TOL};
use crate::error::{Error, Result};

/// Default grid density (samples per cm). High enough that the O(h⁴)
/// integrator error is negligible against the 1e-6 acceptance tolerances.
pub const DEFAULT_SAMPLES_PER_CM: f64 = 1000.0;

/// Parametric description of an envelope prior to sampling and normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvelopeKind {
    /// Flat Ω over the whole length.
    Constant,
    /// One full period of 1 − cos, vanishing at both facets.
    FullCosine,
    /// Cosine ramp up, flat plateau, cosine ramp down; leftover length is
    /// split into zero-coupling tails at both ends.
    Sandwich { ramp_len: f64, flat_len: f64 },
    /// Centered Gaussian bump with the facet value subtracted so the envelope
    /// vanishes at both ends.
    RaisedGaussian { width: f64 },
    /// Explicit samples on [0, total_length], interpolated to the grid.
    Custom { samples: Vec<(f64, f64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeShape {
    #[serde(flatten)]
    pub kind: EnvelopeKind,
    pub total_length: f64,
    #[serde(default = "default_density")]
    pub samples_per_cm: f64,
}

fn default_density() -> f64 {
    DEFAULT_SAMPLES_PER_CM
}

impl EnvelopeShape {
    pub fn new(kind: EnvelopeKind, total_length: f64) -> Self {
        Self {
            kind,
            total_length,
            samples_per_cm: DEFAULT_SAMPLES_PER_CM,
        }
    }

    pub fn with_density(mut self, samples_per_cm: f64) -> Self {
        self.samples_per_cm = samples_per_cm;
        self
    }

    pub fn constant(total_length: f64) -> Self {
        Self::new(EnvelopeKind::Constant, total_length)
    }

    pub fn full_cosine(total_length: f64) -> Self {
        Self::new(EnvelopeKind::FullCosine, total_length)
    }

    pub fn sandwich(ramp_len: f64, flat_len: f64, total_length: f64) -> Self {
        Self::new(EnvelopeKind::Sandwich { ramp_len, flat_len }, total_length)
    }

    pub fn raised_gaussian(width: f64, total_length: f64) -> Self {
        Self::new(EnvelopeKind::RaisedGaussian { width }, total_length)
    }

    /// The canonical four functionally equivalent shapes at a given length.
    pub fn builtin_four(total_length: f64) -> [Self; 4] {
        let ramp = total_length / 4.0;
        let flat = total_length / 2.0;
        [
            Self::constant(total_length),
            Self::full_cosine(total_length),
            Self::sandwich(ramp, flat, total_length),
            Self::raised_gaussian(total_length / 6.0, total_length),
        ]
    }

    fn validate(&self) -> Result<()> {
        if !(self.total_length > 0.0) || !self.total_length.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "total_length must be positive, got {}",
                self.total_length
            )));
        }
        if !(self.samples_per_cm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "samples_per_cm must be positive, got {}",
                self.samples_per_cm
            )));
        }
        match &self.kind {
            EnvelopeKind::Sandwich { ramp_len, flat_len } => {
                if *ramp_len < 0.0 || *flat_len < 0.0 {
                    return Err(Error::InvalidParameter(
                        "sandwich section lengths must be non-negative".into(),
                    ));
                }
                if 2.0 * ramp_len + flat_len > self.total_length * (1.0 + 1e-12) {
                    return Err(Error::InvalidParameter(format!(
                        "sandwich sections (2×{ramp_len} + {flat_len}) exceed total length {}",
                        self.total_length
                    )));
                }
                if ramp_len + flat_len <= 0.0 {
                    return Err(Error::DegenerateEnvelope(
                        "sandwich needs a nonzero ramp or flat section".into(),
                    ));
                }
            }
            EnvelopeKind::RaisedGaussian { width } => {
                if !(*width > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian width must be positive, got {width}"
                    )));
                }
            }
            EnvelopeKind::Custom { samples } => {
                if samples.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "custom envelope needs at least 2 samples".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Unnormalized shape value at z ∈ [0, total_length].
    fn raw_value(&self, z: f64) -> f64 {
        let len = self.total_length;
        match &self.kind {
            EnvelopeKind::Constant => 1.0,
            EnvelopeKind::FullCosine => 1.0 - (2.0 * PI * z / len).cos(),
            EnvelopeKind::Sandwich { ramp_len, flat_len } => {
                let tail = (len - 2.0 * ramp_len - flat_len).max(0.0) / 2.0;
                let (r, f) = (*ramp_len, *flat_len);
                if z < tail || z > len - tail {
                    0.0
                } else if z < tail + r {
                    0.5 * (1.0 - (PI * (z - tail) / r).cos())
                } else if z <= tail + r + f {
                    1.0
                } else {
                    0.5 * (1.0 - (PI * (len - tail - z) / r).cos())
                }
            }
            EnvelopeKind::RaisedGaussian { width } => {
                let arg = (z - len / 2.0) / width;
                let edge = (len / (2.0 * width)).powi(2) / 2.0;
                ((-arg * arg / 2.0).exp() - (-edge).exp()).max(0.0)
            }
            EnvelopeKind::Custom { .. } => unreachable!("custom handled in build_envelope"),
        }
    }
}

/// Sample a shape and rescale it so the trapezoid integral equals π.
pub fn build_envelope(shape: &EnvelopeShape) -> Result<EnvelopeProfile> {
    shape.validate()?;
    let raw = match &shape.kind {
        EnvelopeKind::Custom { samples } => {
            let z: Vec<f64> = samples.iter().map(|s| s.0).collect();
            let w: Vec<f64> = samples.iter().map(|s| s.1).collect();
            EnvelopeProfile::new(z, w)?
        }
        _ => {
            let n = (shape.total_length * shape.samples_per_cm).ceil() as usize + 1;
            let n = n.max(2);
            let z: Vec<f64> = (0..n)
                .map(|i| shape.total_length * i as f64 / (n - 1) as f64)
                .collect();
            let w: Vec<f64> = z.iter().map(|&zi| shape.raw_value(zi)).collect();
            EnvelopeProfile::new(z, w)?
        }
    };
    normalize_to_pi(&raw)
}

fn normalize_to_pi(profile: &EnvelopeProfile) -> Result<EnvelopeProfile> {
    let integral = profile.integral();
    if integral <= 0.0 {
        return Err(Error::DegenerateEnvelope(
            "envelope integrates to zero; cannot normalize to the cyclicity budget".into(),
        ));
    }
    let scale = PI / integral;
    EnvelopeProfile::new(
        profile.z_grid().to_vec(),
        profile.omega().iter().map(|&w| w * scale).collect(),
    )
}

/// Trapezoid phase budget of a profile: `(δ(z_f), δ(z_f) − π)`.
pub fn check_cyclicity(profile: &EnvelopeProfile) -> (f64, f64) {
    let delta = profile.integral();
    (delta, delta - PI)
}

/// Pull an envelope through a monotone warp of its parameter interval,
/// `Ω̃(z) = Ω(g(z))·g′(z)`, preserving the integral. The derivative is taken
/// by finite differences on the warped grid, and the result is rescaled by
/// one final factor so the trapezoid integral matches the input exactly
/// (resampling a piecewise-linear envelope off its nodes otherwise leaks
/// O(h²) of the budget).
pub fn reparametrize(
    profile: &EnvelopeProfile,
    warp: impl Fn(f64) -> f64,
) -> Result<EnvelopeProfile> {
    let z0 = profile.z_start();
    let span = profile.length();
    let z = profile.z_grid();
    let n = z.len();

    let s: Vec<f64> = z.iter().map(|&zi| (zi - z0) / span).collect();
    let g: Vec<f64> = s.iter().map(|&si| warp(si)).collect();

    if (g[0]).abs() > 1e-9 || (g[n - 1] - 1.0).abs() > 1e-9 {
        return Err(Error::NonMonotoneWarp(format!(
            "warp must fix the endpoints: g(0) = {}, g(1) = {}",
            g[0],
            g[n - 1]
        )));
    }
    for w in g.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::NonMonotoneWarp(format!(
                "warp not strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
    }

    let deriv = finite_difference_derivative(&s, &g);

    let mut omega = Vec::with_capacity(n);
    for i in 0..n {
        let target = (z0 + span * g[i]).clamp(z0, z0 + span);
        // the true derivative of a monotone warp is non-negative; clip
        // finite-difference undershoot at the boundary stencils
        omega.push(profile.omega_at(target)? * deriv[i].max(0.0));
    }

    let raw = EnvelopeProfile::new(z.to_vec(), omega)?;
    let integral = raw.integral();
    if integral <= 0.0 {
        return Err(Error::DegenerateEnvelope(
            "warped envelope integrates to zero".into(),
        ));
    }
    let scale = profile.integral() / integral;
    EnvelopeProfile::new(
        raw.z_grid().to_vec(),
        raw.omega().iter().map(|&w| w * scale).collect(),
    )
}

/// Grid derivative of sampled data. Uniform grids get fourth-order stencils
/// (five-point interior, one-sided at the edges) so the truncation error
/// stays far below the integral-preservation budget; non-uniform grids fall
/// back to second-order differences.
fn finite_difference_derivative(s: &[f64], g: &[f64]) -> Vec<f64> {
    let n = s.len();
    let h = s[1] - s[0];
    let uniform = n >= 5
        && s.windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300));
    let mut deriv = vec![0.0; n];
    if uniform {
        deriv[0] = (-25.0 * g[0] + 48.0 * g[1] - 36.0 * g[2] + 16.0 * g[3] - 3.0 * g[4])
            / (12.0 * h);
        deriv[1] =
            (-3.0 * g[0] - 10.0 * g[1] + 18.0 * g[2] - 6.0 * g[3] + g[4]) / (12.0 * h);
        for i in 2..n - 2 {
            deriv[i] =
                (g[i - 2] - 8.0 * g[i - 1] + 8.0 * g[i + 1] - g[i + 2]) / (12.0 * h);
        }
        deriv[n - 2] = (3.0 * g[n - 1] + 10.0 * g[n - 2] - 18.0 * g[n - 3] + 6.0 * g[n - 4]
            - g[n - 5])
            / (12.0 * h);
        deriv[n - 1] = (25.0 * g[n - 1] - 48.0 * g[n - 2] + 36.0 * g[n - 3]
            - 16.0 * g[n - 4]
            + 3.0 * g[n - 5])
            / (12.0 * h);
    } else {
        if n >= 3 {
            let h0 = s[1] - s[0];
            deriv[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h0);
            let h1 = s[n - 1] - s[n - 2];
            deriv[n - 1] = (3.0 * g[n - 1] - 4.0 * g[n - 2] + g[n - 3]) / (2.0 * h1);
        } else {
            deriv[0] = (g[1] - g[0]) / (s[1] - s[0]);
            deriv[n - 1] = deriv[0];
        }
        for i in 1..n - 1 {
            deriv[i] = (g[i + 1] - g[i - 1]) / (s[i + 1] - s[i - 1]);
        }
    }
    deriv
}

/// Rescale a cyclic profile so its integral becomes π + ε.
pub fn scale_to_cyclicity_error(profile: &EnvelopeProfile, epsilon: f64) -> Result<EnvelopeProfile> {
    if !profile.is_cyclic(DEFAULT_CYCLICITY_TOL) {
        return Err(Error::InvalidParameter(format!(
            "input profile is not cyclic: residual {:.3e}",
            profile.cyclicity_residual()
        )));
    }
    let target = PI + epsilon;
    if target <= 0.0 {
        return Err(Error::DegenerateEnvelope(format!(
            "target integral π + ε = {target} is not positive"
        )));
    }
    let scale = target / PI;
    EnvelopeProfile::new(
        profile.z_grid().to_vec(),
        profile.omega().iter().map(|&w| w * scale).collect(),
    )
}

/// Load a custom envelope from CSV with the header `z_cm,omega_per_cm`.
/// The result is returned as sampled, without normalization.
pub fn load_envelope_csv(path: impl AsRef<Path>) -> Result<EnvelopeProfile> {
    let text = std::fs::read_to_string(path)?;
    parse_envelope_csv(&text)
}

pub fn parse_envelope_csv(text: &str) -> Result<EnvelopeProfile> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty envelope CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["z_cm", "omega_per_cm"] {
        return Err(Error::Parse(format!(
            "expected header 'z_cm,omega_per_cm', got '{header}'"
        )));
    }
    let mut z = Vec::new();
    let mut omega = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Parse(format!(
                "line {}: expected 2 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))
        };
        z.push(parse(fields[0])?);
        omega.push(parse(fields[1])?);
    }
    EnvelopeProfile::new(z, omega)
}
