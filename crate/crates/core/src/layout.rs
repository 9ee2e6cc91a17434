//! Compilation of coupling profiles into physical planar waveguide
//! trajectories via the exponential coupling-distance law κ = a·e^{−bΔ},
//! plus coupling-scan fitting, fanning sections, and geometry export.
//!
//! Units: propagation coordinate in mm on layouts (cm on profiles),
//! transverse positions and separations in µm, couplings in cm⁻¹.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::core::{CouplingProfile, GateSpec};
use crate::error::{Error, Result};
use crate::jsonfmt::format_f64;

/// Sample chips are 100 mm or 150 mm long; exceeding them is worth a warning
/// but is not an error.
pub const CHIP_LENGTH_BUDGETS_MM: [f64; 2] = [100.0, 150.0];

/// Empirical coupling-distance fit κ = a·exp(−b·Δ).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingFit {
    /// Prefactor in cm⁻¹.
    pub a: f64,
    /// Decay constant in µm⁻¹.
    pub b: f64,
}

impl CouplingFit {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "coupling fit requires a > 0 and b > 0, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    /// Typical fabrication values: a ≈ 20 cm⁻¹, b ≈ 0.2 µm⁻¹.
    pub fn typical() -> Self {
        Self { a: 20.0, b: 0.2 }
    }

    pub fn kappa_at(&self, delta_um: f64) -> f64 {
        self.a * (-self.b * delta_um).exp()
    }
}

/// One directional-coupler measurement from a coupling scan.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// Waveguide separation in µm.
    pub delta: f64,
    /// Measured coupling in cm⁻¹.
    pub kappa: f64,
}

/// Least-squares fit of ln κ = ln a − b·Δ. Returns the fit and the residual
/// norm of the log-linear regression.
pub fn fit_coupling_curve(points: &[ScanPoint]) -> Result<(CouplingFit, f64)> {
    for p in points {
        if !(p.kappa > 0.0) || !p.kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "coupling must be positive, got {} at Δ = {}",
                p.kappa, p.delta
            )));
        }
        if !(p.delta > 0.0) || !p.delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "separation must be positive, got {}",
                p.delta
            )));
        }
    }
    let n = points.len();
    if n < 2 {
        return Err(Error::Underdetermined(format!(
            "need at least 2 scan points, got {n}"
        )));
    }
    let mut distinct = points.iter().map(|p| p.delta).collect::<Vec<_>>();
    distinct.sort_by(|x, y| x.partial_cmp(y).unwrap());
    distinct.dedup_by(|x, y| (*x - *y).abs() <= f64::EPSILON * x.abs().max(1.0));
    if distinct.len() < 2 {
        return Err(Error::Underdetermined(
            "scan points must contain at least 2 distinct separations".into(),
        ));
    }

    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.delta).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.kappa.ln()).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for p in points {
        let dx = p.delta - mean_x;
        sxx += dx * dx;
        sxy += dx * (p.kappa.ln() - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let fit = CouplingFit::new(intercept.exp(), -slope)?;

    let residual_norm = points
        .iter()
        .map(|p| {
            let predicted = intercept + slope * p.delta;
            (p.kappa.ln() - predicted).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    Ok((fit, residual_norm))
}

/// Invert the coupling-distance law: Δ = −ln(κ/a)/b, valid for 0 < κ ≤ a.
pub fn distance_from_coupling(kappa: f64, fit: &CouplingFit) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "coupling must be positive to invert the distance law, got {kappa}"
        )));
    }
    if kappa > fit.a {
        return Err(Error::InvalidParameter(format!(
            "coupling {kappa} cm⁻¹ exceeds the fit prefactor {} cm⁻¹; the implied separation would be negative",
            fit.a
        )));
    }
    Ok(-(kappa / fit.a).ln() / fit.b)
}

/// Per-point region tag of a chip layout.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentLabel {
    Gate,
    Fanning,
    Decoupled,
}

impl fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentLabel::Gate => write!(f, "gate"),
            SegmentLabel::Fanning => write!(f, "fanning"),
            SegmentLabel::Decoupled => write!(f, "decoupled"),
        }
    }
}

impl std::str::FromStr for SegmentLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gate" => Ok(SegmentLabel::Gate),
            "fanning" => Ok(SegmentLabel::Fanning),
            "decoupled" => Ok(SegmentLabel::Decoupled),
            other => Err(Error::Parse(format!("unknown segment label '{other}'"))),
        }
    }
}

/// Geometry options for profile-to-trajectory compilation.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    /// Separation representing "completely decoupled" waveguides (µm). The
    /// exponential inverse sends κ → 0 to Δ → ∞; separations are clamped to
    /// this value instead.
    pub decoupled_separation: f64,
    /// Width (µm of separation) of the cosine blend joining the exact
    /// inverse to the clamp.
    pub blend_width: f64,
    /// Smallest separation the writing process resolves (µm).
    pub min_separation: f64,
    /// Permit separations below `min_separation` instead of erroring; the
    /// offending points are recorded in the layout flags.
    pub allow_below_min: bool,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            decoupled_separation: 40.0,
            blend_width: 2.0,
            min_separation: 7.0,
            allow_below_min: false,
        }
    }
}

/// Physical planar chip geometry: transverse positions of the three guides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChipLayout {
    /// Propagation positions in mm.
    pub z_mm: Vec<f64>,
    /// Transverse positions in µm; x_L < x_C < x_R everywhere.
    pub x_l: Vec<f64>,
    pub x_c: Vec<f64>,
    pub x_r: Vec<f64>,
    /// Per-point region tag.
    pub segments: Vec<SegmentLabel>,
    /// Indices where the separation dips below the configured minimum
    /// (only populated when that was explicitly allowed).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub below_min_indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ChipLayout {
    pub fn len(&self) -> usize {
        self.z_mm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_mm.is_empty()
    }

    pub fn total_length_mm(&self) -> f64 {
        if self.z_mm.is_empty() {
            0.0
        } else {
            self.z_mm[self.z_mm.len() - 1] - self.z_mm[0]
        }
    }

    /// Separation |x_C − x_L| per point (µm).
    pub fn separation_left(&self) -> Vec<f64> {
        self.x_c
            .iter()
            .zip(&self.x_l)
            .map(|(c, l)| c - l)
            .collect()
    }

    /// Separation |x_R − x_C| per point (µm).
    pub fn separation_right(&self) -> Vec<f64> {
        self.x_r
            .iter()
            .zip(&self.x_c)
            .map(|(r, c)| r - c)
            .collect()
    }

    /// Relabel every point whose z (mm) falls inside [z_from, z_to].
    pub fn relabel_range(&mut self, z_from_mm: f64, z_to_mm: f64, label: SegmentLabel) {
        for (i, &z) in self.z_mm.iter().enumerate() {
            if z >= z_from_mm - 1e-12 && z <= z_to_mm + 1e-12 {
                self.segments[i] = label;
            }
        }
    }

    fn validate_ordering(&self) -> Result<()> {
        for i in 0..self.len() {
            if !(self.x_l[i] < self.x_c[i] && self.x_c[i] < self.x_r[i]) {
                return Err(Error::UnsupportedGeometry(format!(
                    "waveguides cross or coincide at z = {} mm",
                    self.z_mm[i]
                )));
            }
        }
        Ok(())
    }
}

/// Smoothly clamped separation for one coupling value. Exact inverse of the
/// distance law away from the clamp; a cosine-Hermite blend of width
/// `blend_width` joins it C¹-continuously to the decoupled separation, which
/// is reached exactly once κ falls below the floor a·e^{−b·Δ_dec}.
fn clamped_separation(kappa: f64, fit: &CouplingFit, opts: &TrajectoryOptions) -> Result<f64> {
    let d_max = opts.decoupled_separation;
    let w = opts.blend_width.max(0.0);
    let kappa_floor = fit.kappa_at(d_max);
    if kappa <= kappa_floor {
        return Ok(d_max);
    }
    let raw = distance_from_coupling(kappa, fit)?;
    if w <= 0.0 {
        return Ok(raw.min(d_max));
    }
    let u = (d_max - raw) / w;
    if u >= 1.0 {
        Ok(raw)
    } else {
        // H(u) = u(1 − cos πu)/2 keeps value and slope continuous at u = 1
        // and flattens into the clamp at u = 0
        let h = u * (1.0 - (std::f64::consts::PI * u).cos()) / 2.0;
        Ok(d_max - w * h)
    }
}

/// Compile a real, non-negative coupling profile into planar trajectories:
/// the central guide runs straight at x = 0 and the outer guides follow
/// x_L = −Δ_L(z), x_R = +Δ_R(z) from the inverted distance law.
///
/// Complex couplings (φ ≠ 0) have no planar-geometry realization here and are
/// rejected; they remain simulation-only.
pub fn trajectories_from_profile(
    profile: &CouplingProfile,
    fit: &CouplingFit,
    opts: &TrajectoryOptions,
) -> Result<ChipLayout> {
    const IM_TOL: f64 = 1e-12;
    if !profile.is_real(IM_TOL) {
        return Err(Error::UnsupportedGeometry(
            "complex couplings (φ ≠ 0) cannot be laid out as planar separations".into(),
        ));
    }
    let n = profile.z_grid().len();
    let mut x_l = Vec::with_capacity(n);
    let mut x_r = Vec::with_capacity(n);
    let mut below_min = Vec::new();
    for i in 0..n {
        let kl = profile.kappa_l()[i].re.max(0.0);
        let kr = profile.kappa_r()[i].re.max(0.0);
        let dl = clamped_separation(kl, fit, opts)?;
        let dr = clamped_separation(kr, fit, opts)?;
        if dl < opts.min_separation || dr < opts.min_separation {
            if !opts.allow_below_min {
                return Err(Error::UnsupportedGeometry(format!(
                    "separation {:.3} µm at z = {} cm is below the minimum {} µm; \
                     weaken the coupling or relax min_separation",
                    dl.min(dr),
                    profile.z_grid()[i],
                    opts.min_separation
                )));
            }
            below_min.push(i);
        }
        x_l.push(-dl);
        x_r.push(dr);
    }

    let z_mm: Vec<f64> = profile.z_grid().iter().map(|&z| z * 10.0).collect();
    let mut layout = ChipLayout {
        z_mm,
        x_l,
        x_c: vec![0.0; n],
        x_r,
        segments: vec![SegmentLabel::Gate; n],
        below_min_indices: below_min,
        warnings: Vec::new(),
    };
    push_length_warning(&mut layout);
    layout.validate_ordering()?;
    Ok(layout)
}

fn push_length_warning(layout: &mut ChipLayout) {
    let len = layout.total_length_mm();
    let max_budget = CHIP_LENGTH_BUDGETS_MM[1];
    let min_budget = CHIP_LENGTH_BUDGETS_MM[0];
    if len > max_budget {
        layout.warnings.push(format!(
            "layout length {len:.1} mm exceeds both sample lengths ({min_budget:.0} mm, {max_budget:.0} mm)"
        ));
    } else if len > min_budget {
        layout.warnings.push(format!(
            "layout length {len:.1} mm exceeds the {min_budget:.0} mm sample; requires the {max_budget:.0} mm one"
        ));
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FanEnds {
    Front,
    Back,
    Both,
}

/// Residual coupling budget allowed over one fanning section (rad).
pub const FAN_COUPLING_BUDGET: f64 = 0.01;

/// Append half-cosine fanning ramps that carry the outer waveguides from the
/// gate edge out to the fiber-array pitch. The coupling implied by the fan
/// separations must integrate to at most [`FAN_COUPLING_BUDGET`] per fan;
/// since that integral grows linearly with the fan length, the error reports
/// the longest admissible fan when the bound is violated.
pub fn add_fanning(
    layout: &ChipLayout,
    fit: &CouplingFit,
    pitch: f64,
    fan_length_mm: f64,
    ends: FanEnds,
) -> Result<ChipLayout> {
    if layout.is_empty() {
        return Err(Error::InvalidParameter("cannot fan an empty layout".into()));
    }
    if !(fan_length_mm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fan length must be positive, got {fan_length_mm} mm"
        )));
    }
    let front = matches!(ends, FanEnds::Front | FanEnds::Both);
    let back = matches!(ends, FanEnds::Back | FanEnds::Both);

    // grid spacing follows the existing layout resolution
    let mean_dz = layout.total_length_mm() / (layout.len().saturating_sub(1)).max(1) as f64;
    let fan_points = ((fan_length_mm / mean_dz).ceil() as usize).max(2);

    let build_fan = |edge_l: f64, edge_r: f64, outward: bool| -> Result<(Vec<f64>, Vec<f64>)> {
        for edge in [-edge_l, edge_r] {
            if pitch <= edge {
                return Err(Error::InvalidParameter(format!(
                    "fiber pitch {pitch} µm does not exceed the gate-edge separation {edge} µm"
                )));
            }
        }
        let mut xs_l = Vec::with_capacity(fan_points);
        let mut xs_r = Vec::with_capacity(fan_points);
        for i in 0..fan_points {
            // t = 0 at the gate edge, 1 at the facet
            let t = i as f64 / (fan_points - 1) as f64;
            let t = if outward { t } else { 1.0 - t };
            let ramp = 0.5 * (1.0 - (std::f64::consts::PI * t).cos());
            xs_l.push(edge_l + (-pitch - edge_l) * ramp);
            xs_r.push(edge_r + (pitch - edge_r) * ramp);
        }
        Ok((xs_l, xs_r))
    };

    let check_fan_budget = |xs_l: &[f64], xs_r: &[f64]| -> Result<()> {
        let dz_cm = fan_length_mm / 10.0 / (fan_points - 1) as f64;
        let mut worst: f64 = 0.0;
        for (xs, sign) in [(xs_l, -1.0), (xs_r, 1.0)] {
            let integral: f64 = xs
                .windows(2)
                .map(|w| {
                    let sep0 = sign * w[0];
                    let sep1 = sign * w[1];
                    0.5 * (fit.kappa_at(sep0) + fit.kappa_at(sep1)) * dz_cm
                })
                .sum();
            worst = worst.max(integral);
        }
        if worst > FAN_COUPLING_BUDGET {
            let max_len = fan_length_mm * FAN_COUPLING_BUDGET / worst;
            return Err(Error::InvalidParameter(format!(
                "fanning section accumulates {worst:.4} rad of residual coupling \
                 (budget {FAN_COUPLING_BUDGET}); shorten the fan to at most {max_len:.2} mm \
                 or start it from a more decoupled gate edge"
            )));
        }
        Ok(())
    };

    let mut z = Vec::new();
    let mut x_l = Vec::new();
    let mut x_c = Vec::new();
    let mut x_r = Vec::new();
    let mut segments = Vec::new();

    let fan_dz = fan_length_mm / (fan_points - 1) as f64;
    if front {
        let (fl, fr) = build_fan(layout.x_l[0], layout.x_r[0], false)?;
        check_fan_budget(&fl, &fr)?;
        for i in 0..fan_points - 1 {
            z.push(layout.z_mm[0] - fan_length_mm + fan_dz * i as f64);
            x_l.push(fl[i]);
            x_c.push(0.0);
            x_r.push(fr[i]);
            segments.push(SegmentLabel::Fanning);
        }
    }
    z.extend_from_slice(&layout.z_mm);
    x_l.extend_from_slice(&layout.x_l);
    x_c.extend_from_slice(&layout.x_c);
    x_r.extend_from_slice(&layout.x_r);
    segments.extend_from_slice(&layout.segments);
    if back {
        let last = layout.len() - 1;
        let (fl, fr) = build_fan(layout.x_l[last], layout.x_r[last], true)?;
        check_fan_budget(&fl, &fr)?;
        for i in 1..fan_points {
            z.push(layout.z_mm[last] + fan_dz * i as f64);
            x_l.push(fl[i]);
            x_c.push(0.0);
            x_r.push(fr[i]);
            segments.push(SegmentLabel::Fanning);
        }
    }

    let mut fanned = ChipLayout {
        z_mm: z,
        x_l,
        x_c,
        x_r,
        segments,
        below_min_indices: Vec::new(),
        warnings: Vec::new(),
    };
    push_length_warning(&mut fanned);
    fanned.validate_ordering()?;
    Ok(fanned)
}

/// Re-derive the coupling profile a layout implies through the fit,
/// κ_v(z) = a·e^{−b·Δ_v(z)}; z converts from mm back to cm.
pub fn coupling_profile_from_layout(
    layout: &ChipLayout,
    fit: &CouplingFit,
) -> Result<CouplingProfile> {
    let z_cm: Vec<f64> = layout.z_mm.iter().map(|&z| z / 10.0).collect();
    let kl = layout
        .separation_left()
        .iter()
        .map(|&d| num_complex::Complex64::new(fit.kappa_at(d), 0.0))
        .collect();
    let kr = layout
        .separation_right()
        .iter()
        .map(|&d| num_complex::Complex64::new(fit.kappa_at(d), 0.0))
        .collect();
    CouplingProfile::new(z_cm, kl, kr)
}

/// Optional provenance block for layout exports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct LayoutMetadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<CouplingFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cyclicity_residual: Option<f64>,
}

/// CSV rendition: `z_mm,x_L_um,x_C_um,x_R_um,segment` with floats at 12
/// significant digits (a fixed point of parse-then-format, so export →
/// import → export is byte-identical).
pub fn export_layout_csv(layout: &ChipLayout) -> Result<String> {
    if layout.is_empty() {
        return Err(Error::InvalidParameter("cannot export an empty layout".into()));
    }
    let mut out = String::from("z_mm,x_L_um,x_C_um,x_R_um,segment\n");
    for i in 0..layout.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            format_f64(layout.z_mm[i]),
            format_f64(layout.x_l[i]),
            format_f64(layout.x_c[i]),
            format_f64(layout.x_r[i]),
            layout.segments[i]
        ));
    }
    Ok(out)
}

pub fn import_layout_csv(text: &str) -> Result<ChipLayout> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty layout CSV".into()))?;
    if header.trim() != "z_mm,x_L_um,x_C_um,x_R_um,segment" {
        return Err(Error::Parse(format!(
            "expected header 'z_mm,x_L_um,x_C_um,x_R_um,segment', got '{header}'"
        )));
    }
    let mut layout = ChipLayout {
        z_mm: Vec::new(),
        x_l: Vec::new(),
        x_c: Vec::new(),
        x_r: Vec::new(),
        segments: Vec::new(),
        below_min_indices: Vec::new(),
        warnings: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!(
                "line {}: expected 5 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))
        };
        layout.z_mm.push(parse(fields[0])?);
        layout.x_l.push(parse(fields[1])?);
        layout.x_c.push(parse(fields[2])?);
        layout.x_r.push(parse(fields[3])?);
        layout.segments.push(fields[4].parse()?);
    }
    if layout.is_empty() {
        return Err(Error::Parse("layout CSV has no data rows".into()));
    }
    Ok(layout)
}

/// JSON rendition mirroring the CSV schema plus metadata.
pub fn export_layout_json(layout: &ChipLayout, metadata: &LayoutMetadata) -> Result<String> {
    if layout.is_empty() {
        return Err(Error::InvalidParameter("cannot export an empty layout".into()));
    }
    #[derive(Serialize)]
    struct Export<'a> {
        metadata: &'a LayoutMetadata,
        #[serde(flatten)]
        layout: &'a ChipLayout,
    }
    crate::jsonfmt::to_json_string(&Export { metadata, layout })
}

/// Parse a coupling scan CSV with the header `delta_um,kappa_per_cm`.
pub fn parse_scan_csv(text: &str) -> Result<Vec<ScanPoint>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty scan CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["delta_um", "kappa_per_cm"] {
        return Err(Error::Parse(format!(
            "expected header 'delta_um,kappa_per_cm', got '{header}'"
        )));
    }
    let mut points = Vec::new();
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
        points.push(ScanPoint {
            delta: parse(fields[0])?,
            kappa: parse(fields[1])?,
        });
    }
    Ok(points)
}
