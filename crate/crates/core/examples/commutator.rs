//! Non-Abelian test: the gate sequences H–X–H and X–H–H act differently on
//! the same inputs, so the Hadamard and Pauli-X holonomies do not commute.

use holonomy_sim::sequence::commutator_experiment;

fn main() -> holonomy_sim::Result<()> {
    let report = commutator_experiment()?;

    println!("detection probabilities, rows = input |0>, |1>:");
    println!("\n  Hadamard – Pauli-X – Hadamard:");
    for row in &report.probs_hxh {
        println!("    P(->|0>) = {:.6}   P(->|1>) = {:.6}", row[0], row[1]);
    }
    println!("\n  Pauli-X – Hadamard – Hadamard:");
    for row in &report.probs_xhh {
        println!("    P(->|0>) = {:.6}   P(->|1>) = {:.6}", row[0], row[1]);
    }
    println!(
        "\nmax entrywise difference = {:.6} (1.0 means maximally distinguishable)",
        report.max_difference
    );
    Ok(())
}
