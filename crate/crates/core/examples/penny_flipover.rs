//! The PQ penny flipover: the penny starts on heads; Q plays Hadamard gates
//! in moves one and three, P either flips (Pauli-X) or does nothing in move
//! two. Q's first move prepares a Pauli-X eigenstate, so P's choice cannot
//! matter and Q always wins.

use holonomy_sim::analysis::{simulate_counts, NoiseModel};
use holonomy_sim::sequence::{evolve_sequence, penny_flipover, GateSequence};

fn main() -> holonomy_sim::Result<()> {
    for (label, p_flips) in [("P flips (H–X–H)", true), ("P stays (H–inert–H)", false)] {
        let outcome = penny_flipover(p_flips)?;
        println!("{label:<22} P(Q wins) = {:.9}", outcome.q_win_probability);
    }

    // the same game read out through noisy photon counting
    let u = evolve_sequence(&GateSequence::hadamard_x_hadamard())?;
    let noise = NoiseModel::default();
    let counts = simulate_counts(&u, &noise);
    let wins = counts.counts[0][0];
    let losses = counts.counts[0][1];
    println!(
        "\nwith {} shots and {}% outcoupling noise: {} heads, {} tails -> Q wins {:.4} of detected rounds",
        noise.shots_per_input,
        noise.outcoupling_variation * 100.0,
        wins,
        losses,
        wins as f64 / (wins + losses) as f64
    );
    Ok(())
}
