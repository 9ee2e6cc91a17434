//! Gate-sequence composition: concatenated profiles, the analytic product
//! oracle, the non-commutativity experiment, and the penny-flipover game.
//!
//! Application order is fixed as propagation order: the first-listed element
//! acts first, so the analytic composite of [g₁, g₂, …] is `…·U(g₂)·U(g₁)`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::core::{CouplingProfile, GateSpec, Holonomy2, Mode, QubitState, Unitary3};
use crate::envelopes::{build_envelope, EnvelopeShape, DEFAULT_SAMPLES_PER_CM};
use crate::error::{Error, Result};
use crate::holonomy::analytic_holonomy;
use crate::layout::SegmentLabel;
use crate::propagate::{evolve_auto, single_photon_probabilities};

/// Grid offset inserted at discontinuous element junctions so the global grid
/// stays strictly increasing (cm).
const JUNCTION_EPS: f64 = 1e-9;

/// Default inter-element fanning gap (cm).
pub const DEFAULT_GAP_LENGTH: f64 = 0.5;

/// One sequence element, as stored in sequence definition files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SequenceElementSpec {
    Gate {
        theta: f64,
        #[serde(default)]
        phi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        envelope: Option<EnvelopeShape>,
    },
    Inert {
        length: f64,
    },
}

/// A resolved sequence element.
#[derive(Clone, Debug, PartialEq)]
pub enum Element {
    Gate { gate: GateSpec, shape: EnvelopeShape },
    Inert { length: f64 },
}

/// The canonical single-gate envelope used by sequences unless overridden:
/// a flat section between two cosine ramps on 1 cm.
pub fn default_gate_shape() -> EnvelopeShape {
    EnvelopeShape::sandwich(0.25, 0.5, 1.0)
}

/// An ordered gate/inert sequence with inter-element fanning gaps.
#[derive(Clone, Debug, PartialEq)]
pub struct GateSequence {
    elements: Vec<Element>,
    gap_length: f64,
}

impl GateSequence {
    pub fn new(elements: Vec<Element>, gap_length: f64) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidParameter("sequence must not be empty".into()));
        }
        if gap_length < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gap length must be non-negative, got {gap_length}"
            )));
        }
        for e in &elements {
            if let Element::Inert { length } = e {
                if !(*length > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "inert length must be positive, got {length}"
                    )));
                }
            }
        }
        Ok(Self {
            elements,
            gap_length,
        })
    }

    pub fn from_specs(specs: &[SequenceElementSpec], gap_length: f64) -> Result<Self> {
        let elements = specs
            .iter()
            .map(|spec| match spec {
                SequenceElementSpec::Gate { theta, phi, envelope } => Ok(Element::Gate {
                    gate: GateSpec::new(*theta, *phi)?,
                    shape: envelope.clone().unwrap_or_else(default_gate_shape),
                }),
                SequenceElementSpec::Inert { length } => Ok(Element::Inert { length: *length }),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(elements, gap_length)
    }

    /// Parse a sequence definition file: a JSON array of element records.
    pub fn from_json(text: &str, gap_length: f64) -> Result<Self> {
        let specs: Vec<SequenceElementSpec> = serde_json::from_str(text)?;
        Self::from_specs(&specs, gap_length)
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn gap_length(&self) -> f64 {
        self.gap_length
    }

    /// Hadamard – Pauli-X – Hadamard (the flip branch of the game).
    pub fn hadamard_x_hadamard() -> Self {
        Self::new(
            vec![
                Element::Gate {
                    gate: GateSpec::hadamard(),
                    shape: default_gate_shape(),
                },
                Element::Gate {
                    gate: GateSpec::pauli_x(),
                    shape: default_gate_shape(),
                },
                Element::Gate {
                    gate: GateSpec::hadamard(),
                    shape: default_gate_shape(),
                },
            ],
            DEFAULT_GAP_LENGTH,
        )
        .expect("static sequence is valid")
    }

    /// Pauli-X – Hadamard – Hadamard (the reversed commutator ordering).
    pub fn x_hadamard_hadamard() -> Self {
        Self::new(
            vec![
                Element::Gate {
                    gate: GateSpec::pauli_x(),
                    shape: default_gate_shape(),
                },
                Element::Gate {
                    gate: GateSpec::hadamard(),
                    shape: default_gate_shape(),
                },
                Element::Gate {
                    gate: GateSpec::hadamard(),
                    shape: default_gate_shape(),
                },
            ],
            DEFAULT_GAP_LENGTH,
        )
        .expect("static sequence is valid")
    }

    /// Hadamard – inert – Hadamard (the no-flip branch; the inert section has
    /// the length of a gate so the two branches stay structurally comparable).
    pub fn hadamard_inert_hadamard() -> Self {
        Self::new(
            vec![
                Element::Gate {
                    gate: GateSpec::hadamard(),
                    shape: default_gate_shape(),
                },
                Element::Inert { length: 1.0 },
                Element::Gate {
                    gate: GateSpec::hadamard(),
                    shape: default_gate_shape(),
                },
            ],
            DEFAULT_GAP_LENGTH,
        )
        .expect("static sequence is valid")
    }
}

/// Ordered product of the closed-form holonomies; inert elements contribute
/// the identity.
pub fn compose_analytic(seq: &GateSequence) -> Holonomy2 {
    let mut acc = Holonomy2::identity();
    for element in seq.elements() {
        if let Element::Gate { gate, .. } = element {
            acc = acc.then(&analytic_holonomy(*gate));
        }
    }
    acc
}

/// A labeled z-range of the assembled sequence profile (cm).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSpan {
    pub z_start: f64,
    pub z_end: f64,
    pub label: SegmentLabel,
}

struct PieceGrid {
    z: Vec<f64>,
    kl: Vec<C64>,
    kr: Vec<C64>,
}

fn zero_piece(length: f64) -> PieceGrid {
    let n = ((length * DEFAULT_SAMPLES_PER_CM).ceil() as usize + 1).max(2);
    let z = (0..n)
        .map(|i| length * i as f64 / (n - 1) as f64)
        .collect();
    PieceGrid {
        z,
        kl: vec![C64::new(0.0, 0.0); n],
        kr: vec![C64::new(0.0, 0.0); n],
    }
}

fn gate_piece(gate: GateSpec, shape: &EnvelopeShape) -> Result<PieceGrid> {
    let envelope = build_envelope(shape)?;
    let profile = CouplingProfile::from_gate_envelope(gate, &envelope);
    Ok(PieceGrid {
        z: profile.z_grid().iter().map(|&z| z - profile.z_start()).collect(),
        kl: profile.kappa_l().to_vec(),
        kr: profile.kappa_r().to_vec(),
    })
}

/// Concatenate per-element coupling profiles with zero-coupling gaps of the
/// configured length between elements; also reports labeled spans for layout
/// segmentation. Junctions where the coupling jumps get an epsilon-offset
/// duplicate point so the grid stays strictly increasing.
pub fn build_sequence_profile_with_spans(
    seq: &GateSequence,
) -> Result<(CouplingProfile, Vec<LabeledSpan>)> {
    let mut z = Vec::new();
    let mut kl: Vec<C64> = Vec::new();
    let mut kr: Vec<C64> = Vec::new();
    let mut spans = Vec::new();
    let mut cursor = 0.0f64;

    let append = |piece: &PieceGrid,
                      label: SegmentLabel,
                      cursor: &mut f64,
                      z: &mut Vec<f64>,
                      kl: &mut Vec<C64>,
                      kr: &mut Vec<C64>,
                      spans: &mut Vec<LabeledSpan>| {
        let start = *cursor;
        for i in 0..piece.z.len() {
            let mut zi = start + piece.z[i];
            if let Some(&last) = z.last() {
                if zi <= last {
                    let same = (kl.last().unwrap() - piece.kl[i]).norm() <= 1e-12
                        && (kr.last().unwrap() - piece.kr[i]).norm() <= 1e-12;
                    if same && i == 0 {
                        continue;
                    }
                    zi = last + JUNCTION_EPS;
                }
            }
            z.push(zi);
            kl.push(piece.kl[i]);
            kr.push(piece.kr[i]);
        }
        *cursor = start + piece.z[piece.z.len() - 1];
        spans.push(LabeledSpan {
            z_start: start,
            z_end: *cursor,
            label,
        });
    };

    for (idx, element) in seq.elements().iter().enumerate() {
        if idx > 0 && seq.gap_length() > 0.0 {
            let gap = zero_piece(seq.gap_length());
            append(
                &gap,
                SegmentLabel::Decoupled,
                &mut cursor,
                &mut z,
                &mut kl,
                &mut kr,
                &mut spans,
            );
        }
        match element {
            Element::Gate { gate, shape } => {
                let piece = gate_piece(*gate, shape)?;
                append(
                    &piece,
                    SegmentLabel::Gate,
                    &mut cursor,
                    &mut z,
                    &mut kl,
                    &mut kr,
                    &mut spans,
                );
            }
            Element::Inert { length } => {
                let piece = zero_piece(*length);
                append(
                    &piece,
                    SegmentLabel::Decoupled,
                    &mut cursor,
                    &mut z,
                    &mut kl,
                    &mut kr,
                    &mut spans,
                );
            }
        }
    }

    Ok((CouplingProfile::new(z, kl, kr)?, spans))
}

pub fn build_sequence_profile(seq: &GateSequence) -> Result<CouplingProfile> {
    Ok(build_sequence_profile_with_spans(seq)?.0)
}

/// Propagate the whole sequence end to end.
pub fn evolve_sequence(seq: &GateSequence) -> Result<Unitary3> {
    evolve_auto(&build_sequence_profile(seq)?)
}

/// Detection-probability tables of the two commutator orderings and their
/// maximal entrywise difference. Equal tables would mean the holonomies
/// commute; the ideal gates give a maximal difference of 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport {
    pub probs_hxh: [[f64; 2]; 2],
    pub probs_xhh: [[f64; 2]; 2],
    pub max_difference: f64,
}

fn logical_table(u: &Unitary3) -> [[f64; 2]; 2] {
    let mut p = [[0.0; 2]; 2];
    for k in 0..2 {
        let probs = single_photon_probabilities(u, Mode::logical(k));
        p[k][0] = probs[Mode::Left.index()];
        p[k][1] = probs[Mode::Right.index()];
    }
    p
}

/// Simulate the sequences H–X–H and X–H–H from both logical inputs.
pub fn commutator_experiment() -> Result<CommutatorReport> {
    let hxh = evolve_sequence(&GateSequence::hadamard_x_hadamard())?;
    let xhh = evolve_sequence(&GateSequence::x_hadamard_hadamard())?;
    let probs_hxh = logical_table(&hxh);
    let probs_xhh = logical_table(&xhh);
    let mut max_difference: f64 = 0.0;
    for k in 0..2 {
        for j in 0..2 {
            max_difference = max_difference.max((probs_hxh[k][j] - probs_xhh[k][j]).abs());
        }
    }
    Ok(CommutatorReport {
        probs_hxh,
        probs_xhh,
        max_difference,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PennyOutcome {
    /// Probability that the penny reads heads (|0⟩) after the sequence, which
    /// is Q's winning condition.
    pub q_win_probability: f64,
    /// Leakage-renormalized logical state after the sequence.
    #[serde(skip)]
    pub final_state: QubitState,
}

/// Play the penny flipover: the penny starts on heads (|0⟩), Q applies a
/// Hadamard, P either flips (Pauli-X) or leaves an inert section, and Q
/// applies a Hadamard again. Q wins when the measurement returns heads.
pub fn penny_flipover(p_flips: bool) -> Result<PennyOutcome> {
    let seq = if p_flips {
        GateSequence::hadamard_x_hadamard()
    } else {
        GateSequence::hadamard_inert_hadamard()
    };
    let u = evolve_sequence(&seq)?;
    let m = u.matrix();
    let a0 = m[(Mode::Left.index(), Mode::Left.index())];
    let a1 = m[(Mode::Right.index(), Mode::Left.index())];
    Ok(PennyOutcome {
        q_win_probability: a0.norm_sqr(),
        final_state: QubitState::normalized(a0, a1)?,
    })
}
