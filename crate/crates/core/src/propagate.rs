//! Numerical evolution of the coupled-mode equations and the two-photon lift.
//!
//! Two integration back-ends act as mutual oracles. RK4 integrates
//! `i dU/dz = H(z) U` on the linearly interpolated Hamiltonian and handles
//! arbitrary (time-ordered) profiles. The piecewise-exponential back-end
//! applies one matrix exponential per grid cell with trapezoid-averaged
//! couplings; on the common-envelope family, where H(z) commutes with itself
//! at all z, it reproduces the closed-form gate to machine precision because
//! the cell averages sum to the same trapezoid integral that the cyclicity
//! normalization pins to π.

use nalgebra::Matrix6;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::core::{
    hamiltonian_from_kappas, CMat3, CouplingProfile, Mode, Unitary3,
};
use crate::error::{Error, Result};

/// Minimum RK4 steps per grid point.
pub const MIN_STEPS_PER_GRID_POINT: usize = 10;
/// Unitarity defect allowed on propagated unitaries.
pub const PROPAGATION_UNITARITY_TOL: f64 = 1e-8;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrationMethod {
    Rk4,
    PiecewiseExponential,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub step_count: usize,
    pub method: IntegrationMethod,
}

impl PropagationConfig {
    /// RK4 with the default resolution for the given profile.
    pub fn auto(profile: &CouplingProfile) -> Self {
        Self {
            step_count: MIN_STEPS_PER_GRID_POINT * profile.z_grid().len(),
            method: IntegrationMethod::Rk4,
        }
    }

    pub fn auto_with_method(profile: &CouplingProfile, method: IntegrationMethod) -> Self {
        Self {
            method,
            ..Self::auto(profile)
        }
    }

    pub fn rk4(step_count: usize) -> Self {
        Self {
            step_count,
            method: IntegrationMethod::Rk4,
        }
    }

    pub fn piecewise_exponential() -> Self {
        Self {
            step_count: 0,
            method: IntegrationMethod::PiecewiseExponential,
        }
    }
}

/// `exp(−i s H)` for the star-coupling Hamiltonian built from (κ_L, κ_R).
///
/// H has eigenvalues {0, ±‖κ‖} with H³ = ‖κ‖²·H, so the spectral
/// decomposition collapses to
/// `exp(−isH) = I − i·sin(s‖κ‖)·H/‖κ‖ − (1 − cos(s‖κ‖))·(H/‖κ‖)²`,
/// evaluated with series fallbacks near ‖κ‖ = 0.
pub fn coupler_step_exponential(kappa_l: C64, kappa_r: C64, s: f64) -> CMat3 {
    let h = hamiltonian_from_kappas(kappa_l, kappa_r);
    let omega = (kappa_l.norm_sqr() + kappa_r.norm_sqr()).sqrt();
    let x = s * omega;
    // sin(x)/x and (1 − cos x)/x² with small-x series
    let (sinc, haversinc) = if x.abs() < 1e-5 {
        (1.0 - x * x / 6.0, 0.5 - x * x / 24.0)
    } else {
        (x.sin() / x, (1.0 - x.cos()) / (x * x))
    };
    let c1 = C64::new(0.0, -s * sinc);
    let c2 = C64::new(-s * s * haversinc, 0.0);
    CMat3::identity() + h * c1 + (h * h) * c2
}

fn check_profile(profile: &CouplingProfile) -> Result<()> {
    if profile.has_nan() {
        return Err(Error::NonFinite("coupling profile contains NaN".into()));
    }
    Ok(())
}

fn evolve_rk4(profile: &CouplingProfile, step_count: usize) -> Result<CMat3> {
    let grid_points = profile.z_grid().len();
    let min_steps = MIN_STEPS_PER_GRID_POINT * grid_points;
    if step_count < min_steps {
        return Err(Error::StepCountTooSmall {
            steps: step_count,
            grid_points,
            min_steps,
        });
    }
    let (z0, z1) = (profile.z_start(), profile.z_end());
    let h = (z1 - z0) / step_count as f64;
    let minus_i = C64::new(0.0, -1.0);

    // A(z) = −i H(z); clamp the last evaluation onto the grid edge
    let rhs = |z: f64, u: &CMat3| -> Result<CMat3> {
        let (kl, kr) = profile.kappas_at(z.min(z1))?;
        Ok(hamiltonian_from_kappas(kl, kr) * minus_i * *u)
    };

    let mut u = CMat3::identity();
    for step in 0..step_count {
        let z = z0 + h * step as f64;
        let k1 = rhs(z, &u)?;
        let k2 = rhs(z + h / 2.0, &(u + k1 * C64::new(h / 2.0, 0.0)))?;
        let k3 = rhs(z + h / 2.0, &(u + k2 * C64::new(h / 2.0, 0.0)))?;
        let k4 = rhs(z + h, &(u + k3 * C64::new(h, 0.0)))?;
        u += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4)
            * C64::new(h / 6.0, 0.0);
    }
    Ok(u)
}

fn evolve_piecewise_exponential(profile: &CouplingProfile) -> CMat3 {
    let z = profile.z_grid();
    let kl = profile.kappa_l();
    let kr = profile.kappa_r();
    let mut u = CMat3::identity();
    for i in 1..z.len() {
        let dz = z[i] - z[i - 1];
        let kappa_l = (kl[i - 1] + kl[i]) * 0.5;
        let kappa_r = (kr[i - 1] + kr[i]) * 0.5;
        u = coupler_step_exponential(kappa_l, kappa_r, dz) * u;
    }
    u
}

/// Propagate the full 3-mode unitary across a coupling profile.
///
/// The unitarity defect of the result is validated against
/// [`PROPAGATION_UNITARITY_TOL`] and reported through the returned
/// [`Unitary3`], never silently corrected.
pub fn evolve_unitary(profile: &CouplingProfile, config: PropagationConfig) -> Result<Unitary3> {
    check_profile(profile)?;
    let m = match config.method {
        IntegrationMethod::Rk4 => evolve_rk4(profile, config.step_count)?,
        IntegrationMethod::PiecewiseExponential => evolve_piecewise_exponential(profile),
    };
    Unitary3::with_tol(m, PROPAGATION_UNITARITY_TOL)
}

/// Convenience wrapper: propagate with the default RK4 resolution.
pub fn evolve_auto(profile: &CouplingProfile) -> Result<Unitary3> {
    evolve_unitary(profile, PropagationConfig::auto(profile))
}

/// Detection probabilities (p_L, p_C, p_R) for a photon launched in one mode.
pub fn single_photon_probabilities(u: &Unitary3, input: Mode) -> [f64; 3] {
    let col = input.index();
    let m = u.matrix();
    [
        m[(0, col)].norm_sqr(),
        m[(1, col)].norm_sqr(),
        m[(2, col)].norm_sqr(),
    ]
}

/// Symmetric two-photon basis ordering: (2L, 2C, 2R, LC, LR, CR), stored as
/// ordered mode-index pairs.
pub const TWO_PHOTON_BASIS: [(usize, usize); 6] =
    [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

/// 6×6 unitary on the symmetric two-photon subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoPhotonUnitary {
    matrix: Matrix6<C64>,
}

impl TwoPhotonUnitary {
    pub fn matrix(&self) -> &Matrix6<C64> {
        &self.matrix
    }

    pub fn entry(&self, out: (usize, usize), input: (usize, usize)) -> C64 {
        let row = TWO_PHOTON_BASIS
            .iter()
            .position(|&p| p == out)
            .expect("output pair must be ordered and in range");
        let col = TWO_PHOTON_BASIS
            .iter()
            .position(|&p| p == input)
            .expect("input pair must be ordered and in range");
        self.matrix[(row, col)]
    }

    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.matrix.adjoint() * self.matrix;
        (gram - Matrix6::identity())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

/// Lift a single-photon unitary to the two-photon Fock sector. Amplitudes are
/// permanents of 2×2 sub-matrices with the bosonic √2 factors for doubly
/// occupied modes.
pub fn lift_two_photon(u: &Unitary3) -> TwoPhotonUnitary {
    let m = u.matrix();
    let mut lift = Matrix6::<C64>::zeros();
    for (row, &(w1, w2)) in TWO_PHOTON_BASIS.iter().enumerate() {
        for (col, &(v1, v2)) in TWO_PHOTON_BASIS.iter().enumerate() {
            let permanent = m[(w1, v1)] * m[(w2, v2)] + m[(w1, v2)] * m[(w2, v1)];
            let norm_in: f64 = if v1 == v2 { 2.0 } else { 1.0 };
            let norm_out: f64 = if w1 == w2 { 2.0 } else { 1.0 };
            lift[(row, col)] = permanent / C64::new((norm_in * norm_out).sqrt(), 0.0);
        }
    }
    TwoPhotonUnitary { matrix: lift }
}

/// Coincidence probability for photons entering L and R and leaving in L and
/// R, with partial indistinguishability `q`: a convex mixture of the quantum
/// (permanent) and classical coincidence.
pub fn hom_coincidence(u: &Unitary3, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "indistinguishability must lie in [0, 1], got {q}"
        )));
    }
    let s = u.logical_block();
    let quantum = (s[(0, 0)] * s[(1, 1)] + s[(0, 1)] * s[(1, 0)]).norm_sqr();
    let classical =
        (s[(0, 0)] * s[(1, 1)]).norm_sqr() + (s[(0, 1)] * s[(1, 0)]).norm_sqr();
    Ok(q * quantum + (1.0 - q) * classical)
}

/// `V = (P(q=0) − P(q=1)) / P(q=0)`.
pub fn hom_visibility(u: &Unitary3) -> Result<f64> {
    let classical = hom_coincidence(u, 0.0)?;
    if classical <= 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    let quantum = hom_coincidence(u, 1.0)?;
    Ok((classical - quantum) / classical)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{max_abs_diff3, CouplingProfile, EnvelopeProfile, GateSpec};
    use crate::envelopes::{build_envelope, EnvelopeShape};
    use crate::holonomy::analytic_full_unitary;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn gate_profile(gate: GateSpec, shape: &EnvelopeShape) -> CouplingProfile {
        let env = build_envelope(shape).unwrap();
        CouplingProfile::from_gate_envelope(gate, &env)
    }

    #[test]
    fn zero_profile_gives_identity() {
        let env = EnvelopeProfile::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.0, 0.0]).unwrap();
        let profile = CouplingProfile::from_gate_envelope(GateSpec::hadamard(), &env);
        let u = evolve_auto(&profile).unwrap();
        assert!(max_abs_diff3(u.matrix(), &CMat3::identity()) <= 1e-12);
    }

    #[test]
    fn pauli_x_matches_oracle_for_any_cyclic_envelope() {
        let gate = GateSpec::pauli_x();
        let oracle = analytic_full_unitary(gate);
        for shape in EnvelopeShape::builtin_four(1.0) {
            let profile = gate_profile(gate, &shape);
            let u = evolve_auto(&profile).unwrap();
            let diff = max_abs_diff3(u.matrix(), oracle.matrix());
            assert!(diff <= 1e-6, "{shape:?}: diff {diff}");
        }
    }

    #[test]
    fn hadamard_logical_block() {
        let gate = GateSpec::hadamard();
        let profile = gate_profile(gate, &EnvelopeShape::sandwich(0.25, 0.5, 1.0));
        let u = evolve_auto(&profile).unwrap();
        let block = u.logical_block();
        let inv_sqrt2 = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(block[(0, 0)].re, -inv_sqrt2, epsilon = 1e-6);
        assert_abs_diff_eq!(block[(0, 1)].re, -inv_sqrt2, epsilon = 1e-6);
        assert_abs_diff_eq!(block[(1, 0)].re, -inv_sqrt2, epsilon = 1e-6);
        assert_abs_diff_eq!(block[(1, 1)].re, inv_sqrt2, epsilon = 1e-6);
    }

    #[test]
    fn both_sign_conventions_agree_at_the_cyclic_point() {
        // U = exp(∓i ∫H dz): at δ = π the eigenvalues ±Ω both acquire −1, so
        // the gate is independent of the sign choice.
        let gate = GateSpec::new(1.9, 0.0).unwrap();
        let env = build_envelope(&EnvelopeShape::full_cosine(1.0)).unwrap();
        let profile = CouplingProfile::from_gate_envelope(gate, &env);
        let flipped = profile.map_kappas(|_, kl, kr| (-kl, -kr));
        let plus = evolve_auto(&profile).unwrap();
        let minus = evolve_auto(&flipped).unwrap();
        assert!(max_abs_diff3(plus.matrix(), minus.matrix()) <= 1e-8);
    }

    #[test]
    fn rejects_too_few_steps() {
        let profile = gate_profile(GateSpec::pauli_x(), &EnvelopeShape::constant(1.0));
        let result = evolve_unitary(&profile, PropagationConfig::rk4(5));
        assert!(matches!(result, Err(Error::StepCountTooSmall { .. })));
    }

    #[test]
    fn rejects_nan_profile() {
        let profile = CouplingProfile::new(
            vec![0.0, 1.0],
            vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)],
            vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)],
        )
        .unwrap();
        let bad = profile.map_kappas(|i, kl, kr| {
            if i == 0 {
                (C64::new(f64::NAN, 0.0), kr)
            } else {
                (kl, kr)
            }
        });
        // construction validates, so inject through map and call evolve directly
        assert!(matches!(
            evolve_unitary(&bad, PropagationConfig::auto(&bad)),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn integrators_agree() {
        let gate = GateSpec::new(2.2, 0.9).unwrap();
        for shape in EnvelopeShape::builtin_four(1.2) {
            let profile = gate_profile(gate, &shape);
            let rk4 = evolve_unitary(&profile, PropagationConfig::auto(&profile)).unwrap();
            let pexp =
                evolve_unitary(&profile, PropagationConfig::piecewise_exponential()).unwrap();
            let diff = max_abs_diff3(rk4.matrix(), pexp.matrix());
            assert!(diff <= 1e-8, "{shape:?}: integrator disagreement {diff}");
        }
    }

    #[test]
    fn probabilities_examples() {
        let identity = Unitary3::identity();
        assert_eq!(
            single_photon_probabilities(&identity, Mode::Left),
            [1.0, 0.0, 0.0]
        );

        let hadamard = analytic_full_unitary(GateSpec::hadamard());
        let p = single_photon_probabilities(&hadamard, Mode::Left);
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 0.5, epsilon = 1e-12);

        let pauli_x = analytic_full_unitary(GateSpec::pauli_x());
        let p = single_photon_probabilities(&pauli_x, Mode::Left);
        assert_abs_diff_eq!(p[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 1.0, epsilon = 1e-12);

        let total: f64 = p.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn lift_identity_and_hom_cancellation() {
        let lift = lift_two_photon(&Unitary3::identity());
        assert!(lift.unitarity_defect() <= 1e-12);
        let diff = (lift.matrix() - Matrix6::<C64>::identity())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-12);

        // balanced splitter: the |1_L 1_R⟩ → |1_L 1_R⟩ amplitude is a vanishing permanent
        let hadamard = analytic_full_unitary(GateSpec::hadamard());
        let lift = lift_two_photon(&hadamard);
        assert!(lift.unitarity_defect() <= 1e-12);
        assert!(lift.entry((0, 2), (0, 2)).norm() <= 1e-12);
    }

    #[test]
    fn lift_column_norms_are_one() {
        let gate = GateSpec::new(0.9, 1.7).unwrap();
        let u = analytic_full_unitary(gate);
        let lift = lift_two_photon(&u);
        for col in 0..6 {
            let norm: f64 = (0..6).map(|row| lift.matrix()[(row, col)].norm_sqr()).sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hom_examples() {
        let hadamard = analytic_full_unitary(GateSpec::hadamard());
        assert_abs_diff_eq!(hom_coincidence(&hadamard, 1.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hom_coincidence(&hadamard, 0.0).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(hom_visibility(&hadamard).unwrap(), 1.0, epsilon = 1e-12);

        let identity = Unitary3::identity();
        for q in [0.0, 0.3, 1.0] {
            assert_abs_diff_eq!(hom_coincidence(&identity, q).unwrap(), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(hom_visibility(&identity).unwrap(), 0.0, epsilon = 1e-12);

        assert!(hom_coincidence(&identity, 1.5).is_err());
    }

    #[test]
    fn hom_unbalanced_splitter() {
        // sub-block [[√0.9, √0.1], [√0.1, −√0.9]] with C decoupled:
        // V = 2·0.9·0.1/(0.9² + 0.1²)
        let (t, r) = (0.9f64.sqrt(), 0.1f64.sqrt());
        let zero = C64::new(0.0, 0.0);
        let m = CMat3::new(
            C64::new(t, 0.0),
            zero,
            C64::new(r, 0.0),
            zero,
            C64::new(1.0, 0.0),
            zero,
            C64::new(r, 0.0),
            zero,
            C64::new(-t, 0.0),
        );
        let u = Unitary3::new(m).unwrap();
        let v = hom_visibility(&u).unwrap();
        assert_abs_diff_eq!(v, 2.0 * 0.9 * 0.1 / (0.81 + 0.01), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.219_512_195_121_951_2, epsilon = 1e-12);
    }

    #[test]
    fn visibility_undefined_when_classical_vanishes() {
        // photon from L never reaches L or R: send everything L→C by a π/2 pulse
        // of the single-sided coupler; easier: permute L→C→L with R fixed
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        // swap L and C, leave R: S block has rows (L,R) → columns (L,R) all but R,R zero
        let m = CMat3::new(zero, one, zero, one, zero, zero, zero, zero, one);
        let u = Unitary3::new(m).unwrap();
        assert!(matches!(hom_visibility(&u), Err(Error::UndefinedVisibility)));
    }

    #[test]
    fn rk4_convergence_is_fourth_order() {
        // coarse grid so integration error dominates the floating-point floor
        let gate = GateSpec::hadamard();
        let env = build_envelope(&EnvelopeShape::full_cosine(1.0).with_density(50.0)).unwrap();
        let profile = CouplingProfile::from_gate_envelope(gate, &env);
        let oracle = analytic_full_unitary(gate);
        let base = MIN_STEPS_PER_GRID_POINT * profile.z_grid().len();
        let mut prev_err = f64::INFINITY;
        for halving in 0..4 {
            let steps = base * (1 << halving);
            let u = evolve_unitary(&profile, PropagationConfig::rk4(steps)).unwrap();
            let err = max_abs_diff3(u.matrix(), oracle.matrix());
            if halving > 0 {
                assert!(
                    prev_err / err >= 8.0,
                    "halving {halving}: ratio {} below 8",
                    prev_err / err
                );
            }
            prev_err = err;
        }
    }

    #[test]
    fn leakage_closed_form_for_cyclicity_error() {
        use crate::envelopes::scale_to_cyclicity_error;
        let gate = GateSpec::hadamard();
        let env = build_envelope(&EnvelopeShape::sandwich(0.25, 0.5, 1.0)).unwrap();
        for eps in [0.05, 0.171, 0.4] {
            let off = scale_to_cyclicity_error(&env, eps).unwrap();
            let profile = CouplingProfile::from_gate_envelope(gate, &off);
            let u = evolve_auto(&profile).unwrap();
            let p_center = single_photon_probabilities(&u, Mode::Left)[1];
            let expect = eps.sin().powi(2) * (gate.theta() / 2.0).sin().powi(2);
            assert_abs_diff_eq!(p_center, expect, epsilon = 1e-6);
        }
        // the worked value at ε = 0.171
        let expect = 0.171f64.sin().powi(2) * (3.0 * PI / 8.0).sin().powi(2);
        assert_abs_diff_eq!(expect, 0.0247, epsilon = 5e-5);
    }
}
