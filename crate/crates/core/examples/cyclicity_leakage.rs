//! Photons in the central waveguide diagnose cyclicity failure: detuning the
//! phase budget to π + ε leaks sin²(ε)·sin²(θ/2) of the |0⟩ input into the
//! central mode, quadratically in ε.

use holonomy_sim::core::{CouplingProfile, GateSpec, Mode};
use holonomy_sim::envelopes::{build_envelope, scale_to_cyclicity_error, EnvelopeShape};
use holonomy_sim::propagate::{evolve_auto, single_photon_probabilities};

fn main() -> holonomy_sim::Result<()> {
    let gate = GateSpec::hadamard();
    let envelope = build_envelope(&EnvelopeShape::full_cosine(1.0))?;
    let weight = (gate.theta() / 2.0).sin().powi(2);

    println!("cyclicity error ε | simulated P(center) | sin²(ε)·sin²(θ/2)");
    for eps in [0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0] {
        let detuned = scale_to_cyclicity_error(&envelope, eps)?;
        let profile = CouplingProfile::from_gate_envelope(gate, &detuned);
        let u = evolve_auto(&profile)?;
        let p_center = single_photon_probabilities(&u, Mode::Left)[Mode::Center.index()];
        let closed_form = eps.sin().powi(2) * weight;
        println!("   {eps:12.3}   |   {p_center:.9}    |   {closed_form:.9}");
    }
    Ok(())
}
