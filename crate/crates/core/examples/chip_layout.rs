//! Compile a Hadamard gate into physical waveguide trajectories with the
//! exponential coupling-distance law, add fiber-array fanning, and export
//! fabrication-ready CSV.

use holonomy_sim::core::{CouplingProfile, GateSpec};
use holonomy_sim::envelopes::{build_envelope, EnvelopeShape};
use holonomy_sim::layout::{
    add_fanning, export_layout_csv, trajectories_from_profile, CouplingFit, FanEnds,
    TrajectoryOptions,
};

fn main() -> holonomy_sim::Result<()> {
    let envelope = build_envelope(&EnvelopeShape::sandwich(0.25, 0.5, 1.0))?;
    let profile = CouplingProfile::from_gate_envelope(GateSpec::hadamard(), &envelope);

    let fit = CouplingFit::typical();
    let opts = TrajectoryOptions::default();
    let gate_section = trajectories_from_profile(&profile, &fit, &opts)?;
    let layout = add_fanning(&gate_section, &fit, 82.0, 5.0, FanEnds::Both)?;

    println!(
        "layout: {} points over {:.1} mm, fanning to ±82 µm at both facets",
        layout.len(),
        layout.total_length_mm()
    );
    let sep_l = layout.separation_left();
    let sep_r = layout.separation_right();
    let min_l = sep_l.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_r = sep_r.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("closest approach: L–C {min_l:.2} µm, C–R {min_r:.2} µm");
    for w in &layout.warnings {
        println!("warning: {w}");
    }

    let csv = export_layout_csv(&layout)?;
    let path = std::env::temp_dir().join("hadamard_layout.csv");
    std::fs::write(&path, &csv)?;
    println!("\nwrote {} ({} rows)", path.display(), csv.lines().count() - 1);
    for line in csv.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
