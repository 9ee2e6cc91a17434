//! The envelope function is a free design choice: four different waveguide
//! trajectories all realize the same Hadamard gate as long as the cyclicity
//! budget ∫Ω dz = π is met.

use holonomy_sim::core::{max_abs_diff3, CouplingProfile, GateSpec};
use holonomy_sim::envelopes::{build_envelope, EnvelopeShape};
use holonomy_sim::holonomy::analytic_full_unitary;
use holonomy_sim::propagate::evolve_auto;

fn main() -> holonomy_sim::Result<()> {
    let gate = GateSpec::hadamard();
    let oracle = analytic_full_unitary(gate);

    let mut unitaries = Vec::new();
    for shape in EnvelopeShape::builtin_four(1.0) {
        let envelope = build_envelope(&shape)?;
        let profile = CouplingProfile::from_gate_envelope(gate, &envelope);
        let u = evolve_auto(&profile)?;
        let peak = envelope.omega().iter().cloned().fold(0.0, f64::max);
        println!(
            "{:<55} peak Ω = {:6.3} cm⁻¹   |U - U_analytic| = {:.2e}",
            format!("{:?}", shape.kind),
            peak,
            max_abs_diff3(u.matrix(), oracle.matrix())
        );
        unitaries.push(u);
    }

    let mut worst: f64 = 0.0;
    for i in 0..unitaries.len() {
        for j in i + 1..unitaries.len() {
            worst = worst.max(max_abs_diff3(unitaries[i].matrix(), unitaries[j].matrix()));
        }
    }
    println!("\nlargest pairwise difference between the four realizations: {worst:.2e}");
    Ok(())
}
