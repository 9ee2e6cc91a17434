//! Measurement statistics: count simulation with the experimental noise
//! model, average fidelity, leakage metrics, and Monte Carlo robustness
//! sweeps.
//!
//! Probability tables are indexed `p[k][j]`: the probability of detecting the
//! logical state `|j⟩` after launching `|k⟩`. Rows are renormalized over the
//! two logical outcomes before entering the fidelity, matching how an
//! experiment post-selected on the outer waveguides computes them; leakage
//! into the central waveguide is reported separately.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{CouplingProfile, EnvelopeProfile, GateSpec, Mode, Unitary3};
use crate::error::{Error, Result};
use crate::holonomy::analytic_holonomy;
use crate::layout::{trajectories_from_profile, CouplingFit, TrajectoryOptions};
use crate::propagate::{evolve_auto, single_photon_probabilities};

/// Raw coincidence counts per logical input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    /// `counts[k][j]`: photons launched in `|k⟩` detected in `|j⟩`.
    pub counts: [[u64; 2]; 2],
    /// Photons detected in the central waveguide per input.
    pub central_counts: [u64; 2],
    pub total_launched: [u64; 2],
}

impl CountTable {
    /// Row-renormalized logical probabilities `p[k][j]`.
    pub fn logical_probabilities(&self) -> Result<[[f64; 2]; 2]> {
        let mut p = [[0.0; 2]; 2];
        for k in 0..2 {
            let sum = (self.counts[k][0] + self.counts[k][1]) as f64;
            if sum <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "no logical counts for input {k}"
                )));
            }
            p[k][0] = self.counts[k][0] as f64 / sum;
            p[k][1] = self.counts[k][1] as f64 / sum;
        }
        Ok(p)
    }

    /// Fraction of detected photons that ended up in the central waveguide.
    pub fn central_fraction(&self, k: usize) -> f64 {
        let total = self.counts[k][0] + self.counts[k][1] + self.central_counts[k];
        if total == 0 {
            0.0
        } else {
            self.central_counts[k] as f64 / total as f64
        }
    }
}

/// Count-noise model: multinomial shot noise plus per-port outcoupling
/// efficiency factors drawn once per run.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub shots_per_input: u64,
    /// Relative spread of the per-port efficiency factors (default 0.01).
    pub outcoupling_variation: f64,
    pub rng_seed: u64,
}

impl NoiseModel {
    pub fn new(shots_per_input: u64, outcoupling_variation: f64, rng_seed: u64) -> Result<Self> {
        if shots_per_input == 0 {
            return Err(Error::InvalidParameter("shots must be positive".into()));
        }
        if !(0.0..1.0).contains(&outcoupling_variation) {
            return Err(Error::InvalidParameter(format!(
                "outcoupling variation must lie in [0, 1), got {outcoupling_variation}"
            )));
        }
        Ok(Self {
            shots_per_input,
            outcoupling_variation,
            rng_seed,
        })
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            shots_per_input: 10_000,
            outcoupling_variation: 0.01,
            rng_seed: 7,
        }
    }
}

/// Bhattacharyya average fidelity between two logical probability tables,
/// `F̄ = ½ Σ_k (Σ_j √(p_kj·q_kj))²` after row renormalization.
pub fn average_fidelity(p_theo: &[[f64; 2]; 2], p_exp: &[[f64; 2]; 2]) -> Result<f64> {
    let theo = renormalize_rows(p_theo)?;
    let exp = renormalize_rows(p_exp)?;
    let mut total = 0.0;
    for k in 0..2 {
        let overlap: f64 = (0..2).map(|j| (theo[k][j] * exp[k][j]).sqrt()).sum();
        total += overlap * overlap;
    }
    Ok(total / 2.0)
}

fn renormalize_rows(p: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let mut out = [[0.0; 2]; 2];
    for k in 0..2 {
        for j in 0..2 {
            if p[k][j] < 0.0 || !p[k][j].is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "probability p[{k}][{j}] = {} is invalid",
                    p[k][j]
                )));
            }
        }
        let sum = p[k][0] + p[k][1];
        if sum <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "row {k} has zero probability mass over the logical outcomes"
            )));
        }
        out[k][0] = p[k][0] / sum;
        out[k][1] = p[k][1] / sum;
    }
    Ok(out)
}

/// Logical probability table of a unitary: `p[k][j] = |U[mode_j, mode_k]|²`.
pub fn unitary_probability_table(u: &Unitary3) -> [[f64; 2]; 2] {
    let mut p = [[0.0; 2]; 2];
    for k in 0..2 {
        let probs = single_photon_probabilities(u, Mode::logical(k));
        p[k][0] = probs[Mode::Left.index()];
        p[k][1] = probs[Mode::Right.index()];
    }
    p
}

/// Ideal table of a gate from its closed-form holonomy.
pub fn gate_probability_table(gate: GateSpec) -> [[f64; 2]; 2] {
    let m = analytic_holonomy(gate).matrix().clone_owned();
    [
        [m[(0, 0)].norm_sqr(), m[(1, 0)].norm_sqr()],
        [m[(0, 1)].norm_sqr(), m[(1, 1)].norm_sqr()],
    ]
}

/// Draw a multinomial count vector by sequential binomial splitting.
fn multinomial(rng: &mut impl Rng, shots: u64, probs: [f64; 3]) -> [u64; 3] {
    let mut remaining = shots;
    let mut rest = 1.0;
    let mut counts = [0u64; 3];
    for i in 0..2 {
        if remaining == 0 || rest <= 0.0 {
            break;
        }
        let p = (probs[i] / rest).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, p)
            .expect("clamped probability is valid")
            .sample(rng);
        counts[i] = draw;
        remaining -= draw;
        rest -= probs[i];
    }
    counts[2] = remaining;
    counts
}

/// Simulate heralded count tables for both logical inputs.
///
/// Per-port efficiency factors are `1 + variation·g` with standard-normal
/// `g`, truncated into [0, 1] (an efficiency cannot exceed unity), drawn once
/// per run and applied multiplicatively to the multinomial counts. Identical
/// seeds give identical tables.
pub fn simulate_counts(u: &Unitary3, noise: &NoiseModel) -> CountTable {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
    let efficiency: [f64; 3] = if noise.outcoupling_variation > 0.0 {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        [
            (1.0 + noise.outcoupling_variation * normal.sample(&mut rng)).clamp(0.0, 1.0),
            (1.0 + noise.outcoupling_variation * normal.sample(&mut rng)).clamp(0.0, 1.0),
            (1.0 + noise.outcoupling_variation * normal.sample(&mut rng)).clamp(0.0, 1.0),
        ]
    } else {
        [1.0; 3]
    };

    let mut counts = [[0u64; 2]; 2];
    let mut central = [0u64; 2];
    for k in 0..2 {
        let probs = single_photon_probabilities(u, Mode::logical(k));
        let raw = multinomial(&mut rng, noise.shots_per_input, probs);
        let scaled: Vec<u64> = raw
            .iter()
            .zip(efficiency.iter())
            .map(|(&n, &f)| (n as f64 * f).round() as u64)
            .collect();
        counts[k][0] = scaled[Mode::Left.index()];
        counts[k][1] = scaled[Mode::Right.index()];
        central[k] = scaled[Mode::Center.index()];
    }
    CountTable {
        counts,
        central_counts: central,
        total_launched: [noise.shots_per_input; 2],
    }
}

/// One-standard-deviation count uncertainty: Poisson noise plus 1% of the
/// total counts for outcoupling-efficiency variation.
pub fn count_uncertainty(n: u64, total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    (n as f64).sqrt() + 0.01 * total as f64
}

/// Central-waveguide probabilities from each logical input:
/// `(|U[C,L]|², |U[C,R]|²)`.
pub fn leakage(u: &Unitary3) -> (f64, f64) {
    let m = u.matrix();
    (m[(1, 0)].norm_sqr(), m[(1, 2)].norm_sqr())
}

/// Perturbation families for robustness sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PerturbationKind {
    /// Constant multiplicative jitter of each coupling weight, drawn per
    /// trial: κ_L ← (1+δ_L)κ_L, κ_R ← (1+δ_R)κ_R with δ ~ N(0, σ).
    WeightJitter { sigma: f64 },
    /// Multiplicative envelope noise (1 + ξ(z)) with standard deviation σ and
    /// the given correlation length in cm (0 = white per sample).
    EnvelopeJitter { sigma: f64, correlation_length: f64 },
    /// Deterministic rescaling of the coupling-distance fit parameters,
    /// applied through a layout round trip: κ ← a'·exp(−b'·Δ(κ)).
    WavelengthShift {
        a_scale: f64,
        b_scale: f64,
        fit: CouplingFit,
        decoupled_separation: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationModel {
    #[serde(flatten)]
    pub kind: PerturbationKind,
    pub trials: u32,
    pub rng_seed: u64,
}

impl PerturbationModel {
    pub fn new(kind: PerturbationKind, trials: u32, rng_seed: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::InvalidParameter("need at least one trial".into()));
        }
        let strengths_ok = match &kind {
            PerturbationKind::WeightJitter { sigma } => *sigma >= 0.0,
            PerturbationKind::EnvelopeJitter {
                sigma,
                correlation_length,
            } => *sigma >= 0.0 && *correlation_length >= 0.0,
            PerturbationKind::WavelengthShift { a_scale, b_scale, .. } => {
                *a_scale > 0.0 && *b_scale > 0.0
            }
        };
        if !strengths_ok {
            return Err(Error::InvalidParameter(
                "perturbation strengths must be non-negative".into(),
            ));
        }
        Ok(Self {
            kind,
            trials,
            rng_seed,
        })
    }
}

/// Per-trial record of a robustness sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u32,
    pub fidelity: f64,
    pub leak_from_0: f64,
    pub leak_from_1: f64,
    /// Shift of the phase budget ∫Ω dz induced by the perturbation (rad).
    pub budget_shift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepStatistics {
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub min_fidelity: f64,
    pub trials: Vec<TrialRecord>,
}

fn correlated_noise(rng: &mut impl Rng, z: &[f64], sigma: f64, corr_len: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let white: Vec<f64> = (0..z.len()).map(|_| normal.sample(rng)).collect();
    if corr_len <= 0.0 {
        return white.iter().map(|&w| sigma * w).collect();
    }
    // normalized Gaussian moving average with kernel width corr_len
    let mut out = Vec::with_capacity(z.len());
    for i in 0..z.len() {
        let mut acc = 0.0;
        let mut norm = 0.0;
        for j in 0..z.len() {
            let u = (z[i] - z[j]) / corr_len;
            if u.abs() > 4.0 {
                continue;
            }
            let w = (-0.5 * u * u).exp();
            acc += w * white[j];
            norm += w * w;
        }
        out.push(sigma * acc / norm.sqrt().max(f64::EPSILON));
    }
    out
}

fn perturb_profile(
    base: &CouplingProfile,
    kind: &PerturbationKind,
    rng: &mut impl Rng,
) -> Result<CouplingProfile> {
    match kind {
        PerturbationKind::WeightJitter { sigma } => {
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            let dl = 1.0 + sigma * normal.sample(rng);
            let dr = 1.0 + sigma * normal.sample(rng);
            Ok(base.map_kappas(|_, kl, kr| (kl * dl, kr * dr)))
        }
        PerturbationKind::EnvelopeJitter {
            sigma,
            correlation_length,
        } => {
            let noise = correlated_noise(rng, base.z_grid(), *sigma, *correlation_length);
            Ok(base.map_kappas(|i, kl, kr| {
                let f = (1.0 + noise[i]).max(0.0);
                (kl * f, kr * f)
            }))
        }
        PerturbationKind::WavelengthShift {
            a_scale,
            b_scale,
            fit,
            decoupled_separation,
        } => {
            let layout = trajectories_from_profile(
                base,
                fit,
                &TrajectoryOptions {
                    decoupled_separation: *decoupled_separation,
                    ..TrajectoryOptions::default()
                },
            )?;
            let (a2, b2) = (fit.a * a_scale, fit.b * b_scale);
            let sep_l = layout.separation_left();
            let sep_r = layout.separation_right();
            Ok(base.map_kappas(|i, _, _| {
                (
                    num_complex::Complex64::new(a2 * (-b2 * sep_l[i]).exp(), 0.0),
                    num_complex::Complex64::new(a2 * (-b2 * sep_r[i]).exp(), 0.0),
                )
            }))
        }
    }
}

/// Monte Carlo sweep over perturbed realizations of one gate.
///
/// Trials are independent: each derives its own RNG stream from
/// `(rng_seed, trial index)`, so the sweep parallelizes with
/// order-independent aggregation and is deterministic under a fixed seed.
pub fn robustness_sweep(
    gate: GateSpec,
    envelope: &EnvelopeProfile,
    model: &PerturbationModel,
) -> Result<SweepStatistics> {
    let base = CouplingProfile::from_gate_envelope(gate, envelope);
    let ideal = gate_probability_table(gate);
    let base_budget = envelope.integral();

    let mut trials: Vec<TrialRecord> = (0..model.trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialRecord> {
            let mut rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
            rng.set_stream(trial as u64 + 1);
            let perturbed = perturb_profile(&base, &model.kind, &mut rng)?;
            let u = evolve_auto(&perturbed)?;
            let fidelity = average_fidelity(&ideal, &unitary_probability_table(&u))?;
            let (leak0, leak1) = leakage(&u);
            Ok(TrialRecord {
                trial,
                fidelity,
                leak_from_0: leak0,
                leak_from_1: leak1,
                budget_shift: profile_budget(&perturbed, gate) - base_budget,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    trials.sort_by_key(|t| t.trial);

    let n = trials.len() as f64;
    let mean = trials.iter().map(|t| t.fidelity).sum::<f64>() / n;
    let var = trials
        .iter()
        .map(|t| (t.fidelity - mean).powi(2))
        .sum::<f64>()
        / n;
    let min = trials
        .iter()
        .map(|t| t.fidelity)
        .fold(f64::INFINITY, f64::min);
    Ok(SweepStatistics {
        mean_fidelity: mean,
        std_fidelity: var.sqrt(),
        min_fidelity: min,
        trials,
    })
}

/// Effective phase budget ∫Ω dz of a profile, backing the envelope out of the
/// gate's stronger coupling weight.
fn profile_budget(profile: &CouplingProfile, gate: GateSpec) -> f64 {
    let (wl, wr) = gate.weights();
    let (wl, wr) = (wl.norm(), wr.norm());
    let z = profile.z_grid();
    let omega: Vec<f64> = (0..z.len())
        .map(|i| {
            if wl >= wr {
                profile.kappa_l()[i].norm() / wl.max(f64::EPSILON)
            } else {
                profile.kappa_r()[i].norm() / wr.max(f64::EPSILON)
            }
        })
        .collect();
    z.windows(2)
        .zip(omega.windows(2))
        .map(|(zw, ow)| 0.5 * (ow[0] + ow[1]) * (zw[1] - zw[0]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{max_abs_diff3, EnvelopeProfile};
    use crate::envelopes::{build_envelope, reparametrize, EnvelopeShape};
    use crate::holonomy::analytic_full_unitary;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn fidelity_examples() {
        let ideal = [[0.5, 0.5], [0.5, 0.5]];
        assert_abs_diff_eq!(average_fidelity(&ideal, &ideal).unwrap(), 1.0, epsilon = 1e-12);

        let skewed = [[0.55, 0.45], [0.45, 0.55]];
        let expect = ((0.5f64 * 0.55).sqrt() + (0.5f64 * 0.45).sqrt()).powi(2);
        assert_abs_diff_eq!(
            average_fidelity(&ideal, &skewed).unwrap(),
            expect,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(expect, 0.997_49, epsilon = 5e-6);

        let identity = [[1.0, 0.0], [0.0, 1.0]];
        let swapped = [[0.0, 1.0], [1.0, 0.0]];
        assert_abs_diff_eq!(
            average_fidelity(&identity, &swapped).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn fidelity_rejects_bad_tables() {
        let ideal = [[0.5, 0.5], [0.5, 0.5]];
        assert!(average_fidelity(&ideal, &[[-0.1, 0.5], [0.5, 0.5]]).is_err());
        assert!(average_fidelity(&ideal, &[[0.0, 0.0], [0.5, 0.5]]).is_err());
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded() {
        let a = [[0.7, 0.3], [0.2, 0.8]];
        let b = [[0.6, 0.4], [0.35, 0.65]];
        let ab = average_fidelity(&a, &b).unwrap();
        let ba = average_fidelity(&b, &a).unwrap();
        assert_abs_diff_eq!(ab, ba, epsilon = 1e-12);
        assert!(ab > 0.0 && ab < 1.0);
    }

    #[test]
    fn counts_deterministic_under_seed() {
        let u = analytic_full_unitary(GateSpec::hadamard());
        let noise = NoiseModel::default();
        let a = simulate_counts(&u, &noise);
        let b = simulate_counts(&u, &noise);
        assert_eq!(a, b);

        let other = NoiseModel {
            rng_seed: 8,
            ..noise
        };
        assert_ne!(simulate_counts(&u, &other), a);
    }

    #[test]
    fn counts_concentrate_for_pauli_x() {
        let u = analytic_full_unitary(GateSpec::pauli_x());
        let noise = NoiseModel::new(100_000, 0.0, 3).unwrap();
        let table = simulate_counts(&u, &noise);
        assert_eq!(table.counts[0][0], 0);
        assert_eq!(table.counts[0][1], 100_000);
        assert_eq!(table.central_counts[0], 0);
        assert_eq!(table.counts[1][0], 100_000);
    }

    #[test]
    fn counts_match_probabilities_within_three_sigma() {
        let u = analytic_full_unitary(GateSpec::hadamard());
        let shots = 10_000u64;
        let noise = NoiseModel::new(shots, 0.0, 12).unwrap();
        let table = simulate_counts(&u, &noise);
        let sigma = (0.5 * 0.5 * shots as f64).sqrt();
        for k in 0..2 {
            for j in 0..2 {
                let expect = 0.5 * shots as f64;
                let got = table.counts[k][j] as f64;
                assert!(
                    (got - expect).abs() <= 3.0 * sigma,
                    "count {got} vs {expect} ± {sigma}"
                );
            }
        }
    }

    #[test]
    fn count_uncertainty_examples() {
        assert_abs_diff_eq!(count_uncertainty(10_000, 10_000), 200.0, epsilon = 1e-12);
        assert_abs_diff_eq!(count_uncertainty(0, 500), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(count_uncertainty(0, 0), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn leakage_examples() {
        let ideal = analytic_full_unitary(GateSpec::hadamard());
        let (l0, l1) = leakage(&ideal);
        assert!(l0 <= 1e-12 && l1 <= 1e-12);

        // cyclicity error ε = 0.171 on the Hadamard: sin²(ε)·sin²(3π/8)
        let env = build_envelope(&EnvelopeShape::sandwich(0.25, 0.5, 1.0)).unwrap();
        let off = crate::envelopes::scale_to_cyclicity_error(&env, 0.171).unwrap();
        let profile = CouplingProfile::from_gate_envelope(GateSpec::hadamard(), &off);
        let u = evolve_auto(&profile).unwrap();
        let (l0, _) = leakage(&u);
        assert_abs_diff_eq!(
            l0,
            0.171f64.sin().powi(2) * (3.0 * PI / 8.0).sin().powi(2),
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(l0, 0.0247, epsilon = 5e-5);
    }

    #[test]
    fn zero_strength_sweep_is_exact() {
        let gate = GateSpec::hadamard();
        let env = build_envelope(&EnvelopeShape::full_cosine(1.0)).unwrap();
        let model =
            PerturbationModel::new(PerturbationKind::WeightJitter { sigma: 0.0 }, 8, 42).unwrap();
        let stats = robustness_sweep(gate, &env, &model).unwrap();
        assert_abs_diff_eq!(stats.mean_fidelity, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(stats.std_fidelity, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sweep_deterministic_and_order_independent() {
        let gate = GateSpec::pauli_x();
        let env = build_envelope(&EnvelopeShape::full_cosine(1.0)).unwrap();
        let model =
            PerturbationModel::new(PerturbationKind::WeightJitter { sigma: 0.02 }, 16, 5).unwrap();
        let a = robustness_sweep(gate, &env, &model).unwrap();
        let b = robustness_sweep(gate, &env, &model).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rescaling_envelope_and_length_is_exact_invariance() {
        // Ω → cΩ with z → z/c leaves the propagated unitary invariant
        let gate = GateSpec::new(1.1, 0.4).unwrap();
        let env = build_envelope(&EnvelopeShape::full_cosine(1.0)).unwrap();
        let c = 2.5;
        let scaled = EnvelopeProfile::new(
            env.z_grid().iter().map(|&z| z / c).collect(),
            env.omega().iter().map(|&w| w * c).collect(),
        )
        .unwrap();
        let u1 = evolve_auto(&CouplingProfile::from_gate_envelope(gate, &env)).unwrap();
        let u2 = evolve_auto(&CouplingProfile::from_gate_envelope(gate, &scaled)).unwrap();
        assert!(max_abs_diff3(u1.matrix(), u2.matrix()) <= 1e-9);
    }

    #[test]
    fn ratio_and_budget_preserving_perturbations_keep_fidelity_one() {
        // random smooth warps preserve both the weight ratio and ∫Ω dz
        let gate = GateSpec::hadamard();
        let env = build_envelope(&EnvelopeShape::full_cosine(1.0)).unwrap();
        let ideal = gate_probability_table(gate);
        for k in 0..10 {
            let c = 0.3 * ((k as f64 + 1.0) / 10.0);
            let warped = reparametrize(&env, |s| s + c * (PI * s).sin() / PI).unwrap();
            let u = evolve_auto(&CouplingProfile::from_gate_envelope(gate, &warped)).unwrap();
            let f = average_fidelity(&ideal, &unitary_probability_table(&u)).unwrap();
            assert!((f - 1.0).abs() <= 1e-9, "warp {k}: fidelity {f}");
        }
    }
}
