//! Fit the exponential coupling-distance law κ = a·e^{−bΔ} to a synthetic
//! coupling scan and invert it back to separations.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use holonomy_sim::layout::{distance_from_coupling, fit_coupling_curve, ScanPoint};

fn main() -> holonomy_sim::Result<()> {
    let (a_true, b_true) = (20.0, 0.2);

    // ten directional couplers with increasing separation, 5% readout noise
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let points: Vec<ScanPoint> = (0..10)
        .map(|i| {
            let delta = 5.0 + 3.0 * i as f64;
            let readout: f64 = 1.0 + noise.sample(&mut rng);
            let kappa = a_true * (-b_true * delta).exp() * readout.max(0.05);
            ScanPoint { delta, kappa }
        })
        .collect();

    println!("scan points (Δ µm, κ cm⁻¹):");
    for p in &points {
        println!("  {:5.1}  {:.5}", p.delta, p.kappa);
    }

    let (fit, residual) = fit_coupling_curve(&points)?;
    println!("\nfit: a = {:.4} cm⁻¹ (true {a_true}), b = {:.5} µm⁻¹ (true {b_true})", fit.a, fit.b);
    println!("log-residual norm = {residual:.4}");

    println!("\ninverting κ -> Δ with the fitted law:");
    for kappa in [10.0, 3.0, 1.0, 0.1] {
        println!("  κ = {kappa:5.1} cm⁻¹ -> Δ = {:.3} µm", distance_from_coupling(kappa, &fit)?);
    }
    Ok(())
}
