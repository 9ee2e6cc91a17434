//! Synthesize the Hadamard gate (θ = 3π/4), propagate it, and compare the
//! result against the closed-form holonomy.

use holonomy_sim::analysis::{average_fidelity, gate_probability_table, leakage, unitary_probability_table};
use holonomy_sim::core::{max_abs_diff3, CouplingProfile, GateSpec};
use holonomy_sim::envelopes::{build_envelope, EnvelopeShape};
use holonomy_sim::holonomy::analytic_full_unitary;
use holonomy_sim::propagate::evolve_auto;

fn main() -> holonomy_sim::Result<()> {
    let gate = GateSpec::hadamard();
    let shape = EnvelopeShape::sandwich(0.25, 0.5, 1.0);
    let envelope = build_envelope(&shape)?;
    println!(
        "envelope: sandwich, length {} cm, cyclicity residual {:.2e}",
        envelope.length(),
        envelope.cyclicity_residual()
    );

    let profile = CouplingProfile::from_gate_envelope(gate, &envelope);
    let u = evolve_auto(&profile)?;
    let oracle = analytic_full_unitary(gate);

    println!("max |U_sim - U_analytic| = {:.3e}", max_abs_diff3(u.matrix(), oracle.matrix()));
    println!("unitarity defect         = {:.3e}", u.unitarity_defect());

    let table = unitary_probability_table(&u);
    println!("\nlogical probability table (rows: input |0>, |1>):");
    for row in &table {
        println!("  {:.6}  {:.6}", row[0], row[1]);
    }

    let fidelity = average_fidelity(&gate_probability_table(gate), &table)?;
    let (leak0, leak1) = leakage(&u);
    println!("\naverage fidelity vs ideal = {fidelity:.9}");
    println!("central-mode leakage      = {leak0:.3e} (from |0>), {leak1:.3e} (from |1>)");
    Ok(())
}
