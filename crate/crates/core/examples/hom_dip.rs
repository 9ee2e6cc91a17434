//! Hong-Ou-Mandel interference on the Hadamard coupler: two photons entering
//! L and R never leave in different outer ports when fully indistinguishable.

use holonomy_sim::core::{CouplingProfile, GateSpec};
use holonomy_sim::envelopes::{build_envelope, EnvelopeShape};
use holonomy_sim::propagate::{evolve_auto, hom_coincidence, hom_visibility, lift_two_photon};

fn main() -> holonomy_sim::Result<()> {
    let envelope = build_envelope(&EnvelopeShape::sandwich(0.25, 0.5, 1.0))?;
    let profile = CouplingProfile::from_gate_envelope(GateSpec::hadamard(), &envelope);
    let u = evolve_auto(&profile)?;

    println!("coincidence P(1_L 1_R -> 1_L 1_R) vs indistinguishability q:");
    for i in 0..=10 {
        let q = i as f64 / 10.0;
        let p = hom_coincidence(&u, q)?;
        let bar = "#".repeat((60.0 * p) as usize);
        println!("  q = {q:.1}: {p:.4} {bar}");
    }
    println!("\nvisibility = {:.6}", hom_visibility(&u)?);

    let lift = lift_two_photon(&u);
    println!("two-photon lift unitarity defect = {:.2e}", lift.unitarity_defect());
    println!("bunched amplitudes |1_L 1_R> -> |2_L>, |2_R>:");
    println!(
        "  {:.4}, {:.4}",
        lift.entry((0, 0), (0, 2)).norm_sqr(),
        lift.entry((2, 2), (0, 2)).norm_sqr()
    );
    Ok(())
}
