//! Batch command-line front end: gate simulation, sequence experiments,
//! layout compilation, HOM prediction, and robustness sweeps.
//!
//! Every report embeds the fully resolved configuration, floats are rendered
//! at 12 significant digits, and all randomness flows from the `--seed` flag,
//! so identical invocations produce byte-identical output.

use std::f64::consts::PI;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::analysis::{
    average_fidelity, gate_probability_table, leakage, robustness_sweep, unitary_probability_table,
    PerturbationKind, PerturbationModel, SweepStatistics,
};
use crate::core::{CMat2, CMat3, CouplingProfile, EnvelopeProfile, GateSpec};
use crate::envelopes::{build_envelope, load_envelope_csv, EnvelopeKind, EnvelopeShape};
use crate::error::Error;
use crate::holonomy::{analytic_full_unitary, analytic_holonomy};
use crate::jsonfmt::{format_f64, to_json_string};
use crate::layout::{
    add_fanning, export_layout_csv, fit_coupling_curve, parse_scan_csv, trajectories_from_profile,
    ChipLayout, CouplingFit, FanEnds, LayoutMetadata, TrajectoryOptions,
};
use crate::propagate::{
    evolve_unitary, hom_coincidence, hom_visibility, IntegrationMethod, PropagationConfig,
    MIN_STEPS_PER_GRID_POINT,
};
use crate::sequence::{
    build_sequence_profile_with_spans, compose_analytic, evolve_sequence, CommutatorReport,
    Element, GateSequence, LabeledSpan,
};

/// Documented default seed for every stochastic component.
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or malformed input files; exit code 2.
    Usage(String),
    /// The computation itself failed; exit code 1.
    Computation(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Computation(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser, Debug)]
#[command(
    name = "holonomy-sim",
    about = "Holonomic three-waveguide gate simulator and layout compiler",
    version
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// RNG seed shared by every stochastic component
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Envelope grid density in samples per cm
    #[arg(long, global = true, default_value_t = 1000.0)]
    pub grid_density: f64,

    /// Integration back-end
    #[arg(long, global = true, value_enum, default_value_t = MethodArg::Rk4)]
    pub method: MethodArg,

    /// RK4 step count (default: 10 per grid point)
    #[arg(long, global = true)]
    pub step_count: Option<usize>,

    /// Output path; stdout when omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,

    /// Interpret --theta/--phi in degrees instead of radians
    #[arg(long, global = true)]
    pub degrees: bool,

    /// Print the resolved configuration instead of running
    #[arg(long, global = true)]
    pub show_config: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Rk4,
    #[value(name = "exp")]
    #[serde(rename = "piecewise-exponential")]
    PiecewiseExponential,
}

impl From<MethodArg> for IntegrationMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rk4 => IntegrationMethod::Rk4,
            MethodArg::PiecewiseExponential => IntegrationMethod::PiecewiseExponential,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate one holonomic gate and compare it to the closed form
    Gate(GateCmd),
    /// Run a gate sequence end to end (file or preset)
    Sequence(SequenceCmd),
    /// Compile a gate or sequence into physical waveguide trajectories
    Layout(LayoutCmd),
    /// Hong-Ou-Mandel coincidence curve and visibility of a gate
    Hom(HomCmd),
    /// Monte Carlo robustness sweep under a perturbation model
    Robustness(RobustnessCmd),
}

#[derive(Args, Debug, Clone)]
pub struct GateAngles {
    /// Weight angle θ
    #[arg(long)]
    pub theta: f64,
    /// Coupling phase φ
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
}

impl GateAngles {
    fn resolve(&self, degrees: bool) -> CliResult<GateSpec> {
        let scale = if degrees { PI / 180.0 } else { 1.0 };
        GateSpec::new(self.theta * scale, self.phi * scale)
            .map_err(|e| usage(format!("invalid gate angles: {e}")))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeArg {
    Constant,
    FullCosine,
    Sandwich,
    RaisedGaussian,
}

#[derive(Args, Debug, Clone)]
pub struct EnvelopeArgs {
    /// Envelope shape of the gate section
    #[arg(long, value_enum, default_value_t = ShapeArg::Sandwich)]
    pub envelope: ShapeArg,
    /// Gate section length in cm
    #[arg(long, default_value_t = 1.0)]
    pub length: f64,
    /// Sandwich ramp length in cm (default: length/4)
    #[arg(long)]
    pub ramp_len: Option<f64>,
    /// Sandwich plateau length in cm (default: length/2)
    #[arg(long)]
    pub flat_len: Option<f64>,
    /// Raised-gaussian width in cm (default: length/6)
    #[arg(long)]
    pub width: Option<f64>,
    /// Custom envelope CSV (z_cm,omega_per_cm); overrides --envelope
    #[arg(long)]
    pub envelope_csv: Option<PathBuf>,
}

impl EnvelopeArgs {
    fn resolve(&self, grid_density: f64) -> CliResult<EnvelopeShape> {
        if let Some(path) = &self.envelope_csv {
            let raw = load_envelope_csv(path)
                .map_err(|e| usage(format!("cannot load envelope CSV: {e}")))?;
            let samples = raw
                .z_grid()
                .iter()
                .zip(raw.omega())
                .map(|(&z, &w)| (z, w))
                .collect();
            return Ok(EnvelopeShape {
                kind: EnvelopeKind::Custom { samples },
                total_length: raw.length(),
                samples_per_cm: grid_density,
            });
        }
        let kind = match self.envelope {
            ShapeArg::Constant => EnvelopeKind::Constant,
            ShapeArg::FullCosine => EnvelopeKind::FullCosine,
            ShapeArg::Sandwich => EnvelopeKind::Sandwich {
                ramp_len: self.ramp_len.unwrap_or(self.length / 4.0),
                flat_len: self.flat_len.unwrap_or(self.length / 2.0),
            },
            ShapeArg::RaisedGaussian => EnvelopeKind::RaisedGaussian {
                width: self.width.unwrap_or(self.length / 6.0),
            },
        };
        Ok(EnvelopeShape {
            kind,
            total_length: self.length,
            samples_per_cm: grid_density,
        })
    }
}

#[derive(Args, Debug)]
pub struct GateCmd {
    #[command(flatten)]
    pub angles: GateAngles,
    #[command(flatten)]
    pub envelope: EnvelopeArgs,
    /// Shots per input for the simulated count table
    #[arg(long, default_value_t = 10_000)]
    pub shots: u64,
    /// Relative outcoupling-efficiency spread for the count table
    #[arg(long, default_value_t = 0.01)]
    pub outcoupling_variation: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequencePreset {
    PennyFlip,
    PennyNoflip,
    Commutator,
}

#[derive(Args, Debug)]
pub struct SequenceCmd {
    /// Sequence definition file: a JSON array of {type, theta, phi, envelope, length}
    #[arg(long, conflicts_with = "preset")]
    pub file: Option<PathBuf>,
    /// Built-in experiment instead of a file
    #[arg(long, value_enum)]
    pub preset: Option<SequencePreset>,
    /// Inter-element fanning gap in cm
    #[arg(long, default_value_t = crate::sequence::DEFAULT_GAP_LENGTH)]
    pub gap_length: f64,
}

#[derive(Args, Debug)]
pub struct LayoutCmd {
    /// Gate angle θ (single-gate layout)
    #[arg(long, conflicts_with = "sequence_file")]
    pub theta: Option<f64>,
    /// Gate phase φ; must be 0 for a physical layout
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
    #[command(flatten)]
    pub envelope: EnvelopeArgs,
    /// Sequence definition file instead of a single gate
    #[arg(long)]
    pub sequence_file: Option<PathBuf>,
    /// Inter-element fanning gap in cm (sequence layouts)
    #[arg(long, default_value_t = crate::sequence::DEFAULT_GAP_LENGTH)]
    pub gap_length: f64,
    /// Coupling-fit prefactor a in cm⁻¹
    #[arg(long, default_value_t = 20.0)]
    pub fit_a: f64,
    /// Coupling-fit decay b in µm⁻¹
    #[arg(long, default_value_t = 0.2)]
    pub fit_b: f64,
    /// Coupling scan CSV (delta_um,kappa_per_cm); overrides --fit-a/--fit-b
    #[arg(long)]
    pub scan: Option<PathBuf>,
    /// Separation representing decoupled waveguides (µm)
    #[arg(long, default_value_t = 40.0)]
    pub decoupled_separation: f64,
    /// Cosine blend width joining the inverse law to the clamp (µm)
    #[arg(long, default_value_t = 2.0)]
    pub blend_width: f64,
    /// Minimum fabricable separation (µm)
    #[arg(long, default_value_t = 7.0)]
    pub min_separation: f64,
    /// Allow separations below the minimum (flagged in the layout)
    #[arg(long)]
    pub allow_below_min: bool,
    /// Append fanning sections to the fiber-array pitch
    #[arg(long)]
    pub fanning: bool,
    /// Fiber-array pitch in µm
    #[arg(long, default_value_t = 82.0)]
    pub pitch: f64,
    /// Fanning section length in mm
    #[arg(long, default_value_t = 5.0)]
    pub fan_length: f64,
    /// Which facets receive fans
    #[arg(long, value_enum, default_value_t = FanEndsArg::Both)]
    pub fan_ends: FanEndsArg,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FanEndsArg {
    Front,
    Back,
    Both,
}

impl From<FanEndsArg> for FanEnds {
    fn from(f: FanEndsArg) -> Self {
        match f {
            FanEndsArg::Front => FanEnds::Front,
            FanEndsArg::Back => FanEnds::Back,
            FanEndsArg::Both => FanEnds::Both,
        }
    }
}

#[derive(Args, Debug)]
pub struct HomCmd {
    #[command(flatten)]
    pub angles: GateAngles,
    #[command(flatten)]
    pub envelope: EnvelopeArgs,
    /// Indistinguishability grid: "start:stop:count" or a comma list
    #[arg(long, default_value = "0:1:21")]
    pub q_grid: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationArg {
    WeightJitter,
    EnvelopeJitter,
    WavelengthShift,
}

#[derive(Args, Debug)]
pub struct RobustnessCmd {
    #[command(flatten)]
    pub angles: GateAngles,
    #[command(flatten)]
    pub envelope: EnvelopeArgs,
    /// Perturbation family
    #[arg(long, value_enum, default_value_t = PerturbationArg::EnvelopeJitter)]
    pub kind: PerturbationArg,
    /// Jitter strength σ (weight or envelope jitter)
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    /// Envelope-jitter correlation length in cm (0 = white)
    #[arg(long, default_value_t = 0.0)]
    pub correlation_length: f64,
    /// Wavelength-shift scale on the fit prefactor a
    #[arg(long, default_value_t = 1.0)]
    pub a_scale: f64,
    /// Wavelength-shift scale on the fit decay b
    #[arg(long, default_value_t = 1.0)]
    pub b_scale: f64,
    /// Coupling fit used by the wavelength-shift layout round trip
    #[arg(long, default_value_t = 20.0)]
    pub fit_a: f64,
    #[arg(long, default_value_t = 0.2)]
    pub fit_b: f64,
    /// Decoupled separation for the wavelength-shift round trip (µm)
    #[arg(long, default_value_t = 40.0)]
    pub decoupled_separation: f64,
    /// Number of Monte Carlo trials
    #[arg(long, default_value_t = 100)]
    pub trials: u32,
}

/// Global options as embedded in every report.
#[derive(Serialize, Debug, Clone)]
pub struct ResolvedConfig {
    pub command: String,
    pub seed: u64,
    pub grid_density: f64,
    pub method: MethodArg,
    pub step_count: Option<usize>,
    pub format: FormatArg,
    pub degrees: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ResolvedConfig {
    fn new(global: &GlobalOpts, command: &str) -> Self {
        Self {
            command: command.to_string(),
            seed: global.seed,
            grid_density: global.grid_density,
            method: global.method,
            step_count: global.step_count,
            format: global.format,
            degrees: global.degrees,
            out: global.out.as_ref().map(|p| p.display().to_string()),
        }
    }
}

fn complex_pair(c: C64) -> [f64; 2] {
    [c.re, c.im]
}

fn cmat2_json(m: &CMat2) -> Vec<Vec<[f64; 2]>> {
    (0..2)
        .map(|r| (0..2).map(|c| complex_pair(m[(r, c)])).collect())
        .collect()
}

fn cmat3_json(m: &CMat3) -> Vec<Vec<[f64; 2]>> {
    (0..3)
        .map(|r| (0..3).map(|c| complex_pair(m[(r, c)])).collect())
        .collect()
}

fn propagation_config(global: &GlobalOpts, profile: &CouplingProfile) -> PropagationConfig {
    PropagationConfig {
        step_count: global
            .step_count
            .unwrap_or(MIN_STEPS_PER_GRID_POINT * profile.z_grid().len()),
        method: global.method.into(),
    }
}

#[derive(Serialize)]
struct GateReport {
    config: ResolvedConfig,
    gate: GateSpec,
    envelope: EnvelopeShape,
    cyclicity_residual: f64,
    analytic_holonomy: Vec<Vec<[f64; 2]>>,
    simulated_unitary: Vec<Vec<[f64; 2]>>,
    unitarity_defect: f64,
    max_deviation_from_analytic: f64,
    fidelity_vs_analytic: f64,
    leakage: LeakageReport,
    probability_table: [[f64; 2]; 2],
    counts: crate::analysis::CountTable,
}

#[derive(Serialize)]
struct LeakageReport {
    from_0: f64,
    from_1: f64,
}

fn run_gate(global: &GlobalOpts, cmd: &GateCmd) -> CliResult<Output> {
    let gate = cmd.angles.resolve(global.degrees)?;
    let shape = cmd.envelope.resolve(global.grid_density)?;
    let envelope = build_envelope(&shape)?;
    let profile = CouplingProfile::from_gate_envelope(gate, &envelope);
    let u = evolve_unitary(&profile, propagation_config(global, &profile))?;

    let analytic = analytic_holonomy(gate);
    let analytic_full = analytic_full_unitary(gate);
    let table = unitary_probability_table(&u);
    let fidelity = average_fidelity(&gate_probability_table(gate), &table)?;
    let (leak0, leak1) = leakage(&u);
    let noise = crate::analysis::NoiseModel::new(
        cmd.shots,
        cmd.outcoupling_variation,
        global.seed,
    )?;
    let counts = crate::analysis::simulate_counts(&u, &noise);

    let report = GateReport {
        config: ResolvedConfig::new(global, "gate"),
        gate,
        envelope: shape,
        cyclicity_residual: envelope.cyclicity_residual(),
        analytic_holonomy: cmat2_json(analytic.matrix()),
        simulated_unitary: cmat3_json(u.matrix()),
        unitarity_defect: u.unitarity_defect(),
        max_deviation_from_analytic: crate::core::max_abs_diff3(
            u.matrix(),
            analytic_full.matrix(),
        ),
        fidelity_vs_analytic: fidelity,
        leakage: LeakageReport {
            from_0: leak0,
            from_1: leak1,
        },
        probability_table: table,
        counts,
    };

    match global.format {
        FormatArg::Json => Ok(Output::Text(to_json_string(&report)?)),
        FormatArg::Csv => {
            let mut csv = String::from("input,p_0,p_1,p_center\n");
            for k in 0..2 {
                let probs = crate::propagate::single_photon_probabilities(
                    &u,
                    crate::core::Mode::logical(k),
                );
                csv.push_str(&format!(
                    "{k},{},{},{}\n",
                    format_f64(probs[0]),
                    format_f64(probs[2]),
                    format_f64(probs[1]),
                ));
            }
            Ok(Output::Text(csv))
        }
    }
}

#[derive(Serialize)]
struct SequenceElementReport {
    #[serde(rename = "type")]
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    gate: Option<GateSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    envelope: Option<EnvelopeShape>,
    #[serde(skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    analytic_holonomy: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Serialize)]
struct SequenceReport {
    config: ResolvedConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<SequencePreset>,
    gap_length: f64,
    elements: Vec<SequenceElementReport>,
    analytic_composite: Vec<Vec<[f64; 2]>>,
    end_to_end_unitary: Vec<Vec<[f64; 2]>>,
    logical_table: [[f64; 2]; 2],
    max_deviation_from_analytic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    q_win_probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    commutator: Option<CommutatorReport>,
}

fn run_sequence(global: &GlobalOpts, cmd: &SequenceCmd) -> CliResult<Output> {
    let (seq, preset) = resolve_sequence(cmd)?;
    let u = evolve_sequence(&seq)?;
    let analytic = compose_analytic(&seq);
    let table = unitary_probability_table(&u);
    let deviation = crate::core::max_abs_diff2(&u.logical_block(), analytic.matrix());

    let elements = seq
        .elements()
        .iter()
        .map(|e| match e {
            Element::Gate { gate, shape } => SequenceElementReport {
                kind: "gate".into(),
                gate: Some(*gate),
                envelope: Some(shape.clone()),
                length: None,
                analytic_holonomy: Some(cmat2_json(analytic_holonomy(*gate).matrix())),
            },
            Element::Inert { length } => SequenceElementReport {
                kind: "inert".into(),
                gate: None,
                envelope: None,
                length: Some(*length),
                analytic_holonomy: None,
            },
        })
        .collect();

    let q_win = match preset {
        Some(SequencePreset::PennyFlip) | Some(SequencePreset::PennyNoflip) => {
            Some(u.matrix()[(0, 0)].norm_sqr())
        }
        _ => None,
    };
    let commutator = match preset {
        Some(SequencePreset::Commutator) => Some(crate::sequence::commutator_experiment()?),
        _ => None,
    };

    let report = SequenceReport {
        config: ResolvedConfig::new(global, "sequence"),
        preset,
        gap_length: seq.gap_length(),
        elements,
        analytic_composite: cmat2_json(analytic.matrix()),
        end_to_end_unitary: cmat3_json(u.matrix()),
        logical_table: table,
        max_deviation_from_analytic: deviation,
        q_win_probability: q_win,
        commutator,
    };

    match global.format {
        FormatArg::Json => Ok(Output::Text(to_json_string(&report)?)),
        FormatArg::Csv => {
            let mut csv = String::from("input,p_0,p_1\n");
            for k in 0..2 {
                csv.push_str(&format!(
                    "{k},{},{}\n",
                    format_f64(table[k][0]),
                    format_f64(table[k][1]),
                ));
            }
            Ok(Output::Text(csv))
        }
    }
}

fn resolve_sequence(cmd: &SequenceCmd) -> CliResult<(GateSequence, Option<SequencePreset>)> {
    match (&cmd.file, cmd.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read sequence file: {e}")))?;
            let seq = GateSequence::from_json(&text, cmd.gap_length)
                .map_err(|e| usage(format!("invalid sequence file: {e}")))?;
            Ok((seq, None))
        }
        (None, Some(preset)) => {
            let seq = match preset {
                SequencePreset::PennyFlip => GateSequence::hadamard_x_hadamard(),
                SequencePreset::PennyNoflip => GateSequence::hadamard_inert_hadamard(),
                SequencePreset::Commutator => GateSequence::hadamard_x_hadamard(),
            };
            Ok((seq, Some(preset)))
        }
        (None, None) => Err(usage("provide --file or --preset")),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with handles this"),
    }
}

#[derive(Serialize)]
struct LayoutReport {
    config: ResolvedConfig,
    metadata: LayoutMetadata,
    #[serde(skip_serializing_if = "Option::is_none")]
    scan_fit_residual: Option<f64>,
    #[serde(flatten)]
    layout: ChipLayout,
}

fn run_layout(global: &GlobalOpts, cmd: &LayoutCmd) -> CliResult<Output> {
    let (fit, scan_residual) = match &cmd.scan {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read scan CSV: {e}")))?;
            let points = parse_scan_csv(&text).map_err(|e| usage(format!("invalid scan CSV: {e}")))?;
            let (fit, residual) = fit_coupling_curve(&points)?;
            (fit, Some(residual))
        }
        None => (CouplingFit::new(cmd.fit_a, cmd.fit_b)?, None),
    };
    let opts = TrajectoryOptions {
        decoupled_separation: cmd.decoupled_separation,
        blend_width: cmd.blend_width,
        min_separation: cmd.min_separation,
        allow_below_min: cmd.allow_below_min,
    };

    let (profile, spans, gate, residual): (
        CouplingProfile,
        Vec<LabeledSpan>,
        Option<GateSpec>,
        Option<f64>,
    ) = match (&cmd.sequence_file, cmd.theta) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read sequence file: {e}")))?;
            let seq = GateSequence::from_json(&text, cmd.gap_length)
                .map_err(|e| usage(format!("invalid sequence file: {e}")))?;
            let (profile, spans) = build_sequence_profile_with_spans(&seq)?;
            (profile, spans, None, None)
        }
        (None, Some(theta)) => {
            let scale = if global.degrees { PI / 180.0 } else { 1.0 };
            let gate = GateSpec::new(theta * scale, cmd.phi * scale)
                .map_err(|e| usage(format!("invalid gate angles: {e}")))?;
            let shape = cmd.envelope.resolve(global.grid_density)?;
            let envelope = build_envelope(&shape)?;
            let residual = envelope.cyclicity_residual();
            let profile = CouplingProfile::from_gate_envelope(gate, &envelope);
            (profile, Vec::new(), Some(gate), Some(residual))
        }
        (None, None) => return Err(usage("provide --theta or --sequence-file")),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with handles this"),
    };

    let mut layout = trajectories_from_profile(&profile, &fit, &opts)?;
    for span in &spans {
        layout.relabel_range(span.z_start * 10.0, span.z_end * 10.0, span.label);
    }
    if cmd.fanning {
        layout = add_fanning(&layout, &fit, cmd.pitch, cmd.fan_length, cmd.fan_ends.into())?;
    }

    match global.format {
        FormatArg::Csv => Ok(Output::Text(export_layout_csv(&layout)?)),
        FormatArg::Json => {
            let report = LayoutReport {
                config: ResolvedConfig::new(global, "layout"),
                metadata: LayoutMetadata {
                    fit: Some(fit),
                    gate,
                    cyclicity_residual: residual,
                },
                scan_fit_residual: scan_residual,
                layout,
            };
            Ok(Output::Text(to_json_string(&report)?))
        }
    }
}

#[derive(Serialize)]
struct HomReport {
    config: ResolvedConfig,
    gate: GateSpec,
    envelope: EnvelopeShape,
    visibility: f64,
    curve: Vec<HomPoint>,
    experimental_reference: ExperimentalReference,
}

#[derive(Serialize)]
struct HomPoint {
    q: f64,
    coincidence: f64,
}

/// Measured visibility benchmark quoted alongside the ideal prediction.
#[derive(Serialize)]
struct ExperimentalReference {
    visibility: f64,
    uncertainty: f64,
}

fn parse_q_grid(text: &str) -> CliResult<Vec<f64>> {
    let parse_f = |s: &str| -> CliResult<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| usage(format!("malformed q-grid entry '{s}': {e}")))
    };
    let qs: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(usage(format!(
                "q-grid '{text}' must be 'start:stop:count' or a comma list"
            )));
        }
        let start = parse_f(parts[0])?;
        let stop = parse_f(parts[1])?;
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|e| usage(format!("malformed q-grid count '{}': {e}", parts[2])))?;
        if count < 2 {
            return Err(usage("q-grid needs at least 2 points"));
        }
        (0..count)
            .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
            .collect()
    } else {
        text.split(',').map(parse_f).collect::<CliResult<Vec<_>>>()?
    };
    if qs.is_empty() {
        return Err(usage("empty q-grid"));
    }
    for &q in &qs {
        if !(0.0..=1.0).contains(&q) {
            return Err(usage(format!("q = {q} outside [0, 1]")));
        }
    }
    Ok(qs)
}

fn run_hom(global: &GlobalOpts, cmd: &HomCmd) -> CliResult<Output> {
    let gate = cmd.angles.resolve(global.degrees)?;
    let qs = parse_q_grid(&cmd.q_grid)?;
    let shape = cmd.envelope.resolve(global.grid_density)?;
    let envelope = build_envelope(&shape)?;
    let profile = CouplingProfile::from_gate_envelope(gate, &envelope);
    let u = evolve_unitary(&profile, propagation_config(global, &profile))?;

    let visibility = hom_visibility(&u)?;
    let curve = qs
        .iter()
        .map(|&q| -> CliResult<HomPoint> {
            Ok(HomPoint {
                q,
                coincidence: hom_coincidence(&u, q)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    match global.format {
        FormatArg::Json => {
            let report = HomReport {
                config: ResolvedConfig::new(global, "hom"),
                gate,
                envelope: shape,
                visibility,
                curve,
                experimental_reference: ExperimentalReference {
                    visibility: 0.95,
                    uncertainty: 0.046,
                },
            };
            Ok(Output::Text(to_json_string(&report)?))
        }
        FormatArg::Csv => {
            let mut csv = String::from("q,coincidence\n");
            for point in &curve {
                csv.push_str(&format!(
                    "{},{}\n",
                    format_f64(point.q),
                    format_f64(point.coincidence)
                ));
            }
            Ok(Output::Text(csv))
        }
    }
}

#[derive(Serialize)]
struct RobustnessReport {
    config: ResolvedConfig,
    gate: GateSpec,
    envelope: EnvelopeShape,
    model: PerturbationModel,
    statistics: SweepStatistics,
}

fn run_robustness(global: &GlobalOpts, cmd: &RobustnessCmd) -> CliResult<Output> {
    let gate = cmd.angles.resolve(global.degrees)?;
    let shape = cmd.envelope.resolve(global.grid_density)?;
    let envelope: EnvelopeProfile = build_envelope(&shape)?;

    let kind = match cmd.kind {
        PerturbationArg::WeightJitter => PerturbationKind::WeightJitter { sigma: cmd.sigma },
        PerturbationArg::EnvelopeJitter => PerturbationKind::EnvelopeJitter {
            sigma: cmd.sigma,
            correlation_length: cmd.correlation_length,
        },
        PerturbationArg::WavelengthShift => PerturbationKind::WavelengthShift {
            a_scale: cmd.a_scale,
            b_scale: cmd.b_scale,
            fit: CouplingFit::new(cmd.fit_a, cmd.fit_b)?,
            decoupled_separation: cmd.decoupled_separation,
        },
    };
    let model = PerturbationModel::new(kind, cmd.trials, global.seed)?;
    let statistics = robustness_sweep(gate, &envelope, &model)?;

    match global.format {
        FormatArg::Json => {
            let report = RobustnessReport {
                config: ResolvedConfig::new(global, "robustness"),
                gate,
                envelope: shape,
                model,
                statistics,
            };
            Ok(Output::Text(to_json_string(&report)?))
        }
        FormatArg::Csv => {
            let mut csv = String::from("trial,fidelity,leak_from_0,leak_from_1,budget_shift\n");
            for t in &statistics.trials {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    t.trial,
                    format_f64(t.fidelity),
                    format_f64(t.leak_from_0),
                    format_f64(t.leak_from_1),
                    format_f64(t.budget_shift)
                ));
            }
            Ok(Output::Text(csv))
        }
    }
}

enum Output {
    Text(String),
}

#[derive(Serialize)]
struct ShowConfig<'a> {
    config: &'a ResolvedConfig,
    defaults: ConfigDefaults,
}

/// Every tunable default, printable via --show-config.
#[derive(Serialize)]
struct ConfigDefaults {
    seed: u64,
    grid_density_per_cm: f64,
    steps_per_grid_point: usize,
    cyclicity_tol: f64,
    unitarity_tol: f64,
    propagation_unitarity_tol: f64,
    gap_length_cm: f64,
    fit_a_per_cm: f64,
    fit_b_per_um: f64,
    decoupled_separation_um: f64,
    blend_width_um: f64,
    min_separation_um: f64,
    fiber_pitch_um: f64,
    fan_length_mm: f64,
    fan_coupling_budget_rad: f64,
    shots_per_input: u64,
    outcoupling_variation: f64,
}

impl Default for ConfigDefaults {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            grid_density_per_cm: crate::envelopes::DEFAULT_SAMPLES_PER_CM,
            steps_per_grid_point: MIN_STEPS_PER_GRID_POINT,
            cyclicity_tol: crate::core::DEFAULT_CYCLICITY_TOL,
            unitarity_tol: crate::core::DEFAULT_UNITARITY_TOL,
            propagation_unitarity_tol: crate::propagate::PROPAGATION_UNITARITY_TOL,
            gap_length_cm: crate::sequence::DEFAULT_GAP_LENGTH,
            fit_a_per_cm: 20.0,
            fit_b_per_um: 0.2,
            decoupled_separation_um: 40.0,
            blend_width_um: 2.0,
            min_separation_um: 7.0,
            fiber_pitch_um: 82.0,
            fan_length_mm: 5.0,
            fan_coupling_budget_rad: crate::layout::FAN_COUPLING_BUDGET,
            shots_per_input: 10_000,
            outcoupling_variation: 0.01,
        }
    }
}

/// Execute a parsed invocation; the caller maps [`CliError`] to exit codes.
pub fn run(cli: Cli) -> CliResult<()> {
    let command_name = match &cli.command {
        Command::Gate(_) => "gate",
        Command::Sequence(_) => "sequence",
        Command::Layout(_) => "layout",
        Command::Hom(_) => "hom",
        Command::Robustness(_) => "robustness",
    };

    if cli.global.show_config {
        let config = ResolvedConfig::new(&cli.global, command_name);
        let text = to_json_string(&ShowConfig {
            config: &config,
            defaults: ConfigDefaults::default(),
        })?;
        return write_output(&cli.global, text);
    }

    let Output::Text(text) = match &cli.command {
        Command::Gate(cmd) => run_gate(&cli.global, cmd)?,
        Command::Sequence(cmd) => run_sequence(&cli.global, cmd)?,
        Command::Layout(cmd) => run_layout(&cli.global, cmd)?,
        Command::Hom(cmd) => run_hom(&cli.global, cmd)?,
        Command::Robustness(cmd) => run_robustness(&cli.global, cmd)?,
    };
    write_output(&cli.global, text)
}

fn write_output(global: &GlobalOpts, mut text: String) -> CliResult<()> {
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &global.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Computation(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
