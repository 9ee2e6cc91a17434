//! Domain types and mode-index conventions for the planar three-waveguide coupler.
//!
//! Mode ordering is fixed globally as (L, C, R): index 0 is the left
//! waveguide, 1 the central one, 2 the right one. The logical qubit lives on
//! the (L, R) sub-block, `|0⟩ = |1_L 0_C 0_R⟩`, `|1⟩ = |0_L 0_C 1_R⟩`.
//!
//! Sign convention: the coupled-mode equations are `i da/dz = H(z) a`, so the
//! propagator is the path-ordered exponential of `-i ∫ H dz`. At the cyclic
//! point `∫Ω dz = π` both sign choices produce the same gate (the nonzero
//! eigenvalues ±Ω each pick up a phase of -1); this is checked by a test in
//! the propagation module.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on the cyclicity residual `|∫Ω dz − π|`.
pub const DEFAULT_CYCLICITY_TOL: f64 = 1e-9;
/// Default tolerance on `max |U†U − I|` for unitary-typed matrices.
pub const DEFAULT_UNITARITY_TOL: f64 = 1e-9;

pub type CMat2 = Matrix2<C64>;
pub type CMat3 = Matrix3<C64>;
pub type CVec3 = Vector3<C64>;

/// Waveguide labels in the fixed (L, C, R) ordering.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Left = 0,
    Center = 1,
    Right = 2,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Left, Mode::Center, Mode::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Mode carrying the logical basis state `|k⟩` (k = 0 → L, k = 1 → R).
    pub fn logical(k: usize) -> Mode {
        match k {
            0 => Mode::Left,
            1 => Mode::Right,
            _ => panic!("logical index must be 0 or 1, got {k}"),
        }
    }
}

/// Largest entrywise modulus of a 3×3 complex matrix difference.
pub fn max_abs_diff3(a: &CMat3, b: &CMat3) -> f64 {
    (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Largest entrywise modulus of a 2×2 complex matrix difference.
pub fn max_abs_diff2(a: &CMat2, b: &CMat2) -> f64 {
    (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn unitarity_defect<const N: usize>(m: &nalgebra::SMatrix<C64, N, N>) -> f64 {
    let gram = m.adjoint() * m;
    let eye = nalgebra::SMatrix::<C64, N, N>::identity();
    (gram - eye).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// The (θ, φ) pair that fully determines one holonomic gate.
///
/// Angles are normalized into [0, 2π) on construction.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    theta: f64,
    phi: f64,
}

impl GateSpec {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::NonFinite(format!(
                "gate angles must be finite, got theta={theta}, phi={phi}"
            )));
        }
        Ok(Self {
            theta: theta.rem_euclid(TAU),
            phi: phi.rem_euclid(TAU),
        })
    }

    /// θ = 3π/4: the (negative) Hadamard gate.
    pub fn hadamard() -> Self {
        Self::new(3.0 * PI / 4.0, 0.0).unwrap()
    }

    /// θ = π/2: the (negative) Pauli-X gate.
    pub fn pauli_x() -> Self {
        Self::new(PI / 2.0, 0.0).unwrap()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Unit-envelope coupling weights `(sin(θ/2)·e^{iφ}, cos(θ/2))`.
    pub fn weights(&self) -> (C64, C64) {
        let half = self.theta / 2.0;
        let phase = C64::from_polar(1.0, self.phi);
        (phase * half.sin(), C64::new(half.cos(), 0.0))
    }
}

fn validate_grid(z: &[f64]) -> Result<()> {
    if z.len() < 2 {
        return Err(Error::InvalidGrid(format!(
            "need at least 2 grid points, got {}",
            z.len()
        )));
    }
    for w in z.windows(2) {
        if !w[0].is_finite() || !w[1].is_finite() {
            return Err(Error::InvalidGrid("non-finite grid position".into()));
        }
        if w[1] <= w[0] {
            return Err(Error::InvalidGrid(format!(
                "grid must be strictly increasing, found {} after {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

/// Linear interpolation of sampled values at `z`; `z` must lie on the grid range.
fn lerp<T>(z_grid: &[f64], values: &[T], z: f64) -> Result<T>
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let (first, last) = (z_grid[0], z_grid[z_grid.len() - 1]);
    if !(first..=last).contains(&z) {
        return Err(Error::OutOfRange {
            z,
            min: first,
            max: last,
        });
    }
    // index of the cell containing z
    let hi = z_grid.partition_point(|&g| g < z).min(z_grid.len() - 1);
    let lo = hi.saturating_sub(1);
    if hi == lo {
        return Ok(values[lo]);
    }
    let t = (z - z_grid[lo]) / (z_grid[hi] - z_grid[lo]);
    Ok(values[lo] * (1.0 - t) + values[hi] * t)
}

fn trapezoid(z: &[f64], f: &[f64]) -> f64 {
    z.windows(2)
        .zip(f.windows(2))
        .map(|(zw, fw)| 0.5 * (fw[0] + fw[1]) * (zw[1] - zw[0]))
        .sum()
}

/// Sampled envelope Ω(z) ≥ 0 on a strictly increasing grid (cm, cm⁻¹).
///
/// The cyclicity budget `∫Ω dz = π` is measured with the trapezoid rule on
/// the sample grid; that quadrature is the single authoritative integral
/// throughout the crate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeProfile {
    z: Vec<f64>,
    omega: Vec<f64>,
}

impl EnvelopeProfile {
    pub fn new(z: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        validate_grid(&z)?;
        if omega.len() != z.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} envelope samples, got {}",
                z.len(),
                omega.len()
            )));
        }
        for &w in &omega {
            if !w.is_finite() {
                return Err(Error::NonFinite("envelope sample".into()));
            }
            if w < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "envelope must be non-negative, found {w}"
                )));
            }
        }
        Ok(Self { z, omega })
    }

    pub fn z_grid(&self) -> &[f64] {
        &self.z
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn z_start(&self) -> f64 {
        self.z[0]
    }

    pub fn z_end(&self) -> f64 {
        self.z[self.z.len() - 1]
    }

    pub fn length(&self) -> f64 {
        self.z_end() - self.z_start()
    }

    /// Trapezoid integral `∫Ω dz` over the full grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.z, &self.omega)
    }

    /// `∫Ω dz − π`.
    pub fn cyclicity_residual(&self) -> f64 {
        self.integral() - PI
    }

    pub fn is_cyclic(&self, tol: f64) -> bool {
        self.cyclicity_residual().abs() <= tol
    }

    pub fn omega_at(&self, z: f64) -> Result<f64> {
        lerp(&self.z, &self.omega, z)
    }

    /// Accumulated phase `δ(z) = ∫_{z_i}^z Ω dz'` at every grid point.
    pub fn accumulated_phase(&self) -> Vec<f64> {
        let mut delta = Vec::with_capacity(self.z.len());
        let mut acc = 0.0;
        delta.push(0.0);
        for i in 1..self.z.len() {
            acc += 0.5 * (self.omega[i - 1] + self.omega[i]) * (self.z[i] - self.z[i - 1]);
            delta.push(acc);
        }
        delta
    }
}

/// Sampled complex couplings κ_L(z), κ_R(z) (cm⁻¹); the Hamiltonian source.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingProfile {
    z: Vec<f64>,
    kappa_l: Vec<C64>,
    kappa_r: Vec<C64>,
}

impl CouplingProfile {
    pub fn new(z: Vec<f64>, kappa_l: Vec<C64>, kappa_r: Vec<C64>) -> Result<Self> {
        validate_grid(&z)?;
        if kappa_l.len() != z.len() || kappa_r.len() != z.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} coupling samples, got {} (L) and {} (R)",
                z.len(),
                kappa_l.len(),
                kappa_r.len()
            )));
        }
        for k in kappa_l.iter().chain(kappa_r.iter()) {
            if !k.re.is_finite() || !k.im.is_finite() {
                return Err(Error::NonFinite("coupling sample".into()));
            }
        }
        Ok(Self { z, kappa_l, kappa_r })
    }

    /// Factorized construction `κ_L = Ω·sin(θ/2)·e^{iφ}`, `κ_R = Ω·cos(θ/2)`.
    pub fn from_gate_envelope(gate: GateSpec, envelope: &EnvelopeProfile) -> Self {
        let (wl, wr) = gate.weights();
        let kappa_l = envelope.omega.iter().map(|&w| wl * w).collect();
        let kappa_r = envelope.omega.iter().map(|&w| wr * w).collect();
        Self {
            z: envelope.z.clone(),
            kappa_l,
            kappa_r,
        }
    }

    pub fn z_grid(&self) -> &[f64] {
        &self.z
    }

    pub fn kappa_l(&self) -> &[C64] {
        &self.kappa_l
    }

    pub fn kappa_r(&self) -> &[C64] {
        &self.kappa_r
    }

    pub fn z_start(&self) -> f64 {
        self.z[0]
    }

    pub fn z_end(&self) -> f64 {
        self.z[self.z.len() - 1]
    }

    pub fn length(&self) -> f64 {
        self.z_end() - self.z_start()
    }

    pub fn kappas_at(&self, z: f64) -> Result<(C64, C64)> {
        Ok((lerp(&self.z, &self.kappa_l, z)?, lerp(&self.z, &self.kappa_r, z)?))
    }

    /// True when every sample is real within `tol` on the imaginary part.
    pub fn is_real(&self, tol: f64) -> bool {
        self.kappa_l
            .iter()
            .chain(self.kappa_r.iter())
            .all(|k| k.im.abs() <= tol)
    }

    pub fn has_nan(&self) -> bool {
        self.kappa_l
            .iter()
            .chain(self.kappa_r.iter())
            .any(|k| k.re.is_nan() || k.im.is_nan())
    }

    /// Map both couplings through `f` pointwise, keeping the grid.
    pub fn map_kappas(&self, mut f: impl FnMut(usize, C64, C64) -> (C64, C64)) -> Self {
        let mut kl = Vec::with_capacity(self.z.len());
        let mut kr = Vec::with_capacity(self.z.len());
        for i in 0..self.z.len() {
            let (a, b) = f(i, self.kappa_l[i], self.kappa_r[i]);
            kl.push(a);
            kr.push(b);
        }
        Self {
            z: self.z.clone(),
            kappa_l: kl,
            kappa_r: kr,
        }
    }
}

/// Coupler Hamiltonian for pointwise couplings: zero diagonal, zero direct
/// L–R element, `H[C,L] = κ_L`, `H[C,R] = κ_R`, Hermitian conjugates mirrored.
pub fn hamiltonian_from_kappas(kappa_l: C64, kappa_r: C64) -> CMat3 {
    let zero = C64::new(0.0, 0.0);
    CMat3::new(
        zero,
        kappa_l.conj(),
        zero,
        kappa_l,
        zero,
        kappa_r,
        zero,
        kappa_r.conj(),
        zero,
    )
}

/// H(z) with κ values linearly interpolated on the profile grid.
pub fn hamiltonian_at(profile: &CouplingProfile, z: f64) -> Result<CMat3> {
    let (kl, kr) = profile.kappas_at(z)?;
    Ok(hamiltonian_from_kappas(kl, kr))
}

/// 3×3 unitary on the (L, C, R) modes.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary3 {
    matrix: CMat3,
}

impl Unitary3 {
    pub fn new(matrix: CMat3) -> Result<Self> {
        Self::with_tol(matrix, DEFAULT_UNITARITY_TOL)
    }

    pub fn with_tol(matrix: CMat3, tol: f64) -> Result<Self> {
        let defect = unitarity_defect(&matrix);
        if defect > tol {
            return Err(Error::UnitarityViolation { defect, tol });
        }
        Ok(Self { matrix })
    }

    pub fn identity() -> Self {
        Self {
            matrix: CMat3::identity(),
        }
    }

    pub fn matrix(&self) -> &CMat3 {
        &self.matrix
    }

    /// `max |U†U − I|`, reported rather than silently corrected.
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }

    /// The logical (L, R) sub-block as a 2×2 matrix.
    pub fn logical_block(&self) -> CMat2 {
        let m = &self.matrix;
        CMat2::new(m[(0, 0)], m[(0, 2)], m[(2, 0)], m[(2, 2)])
    }

    pub fn entry(&self, row: Mode, col: Mode) -> C64 {
        self.matrix[(row.index(), col.index())]
    }
}

/// 2×2 holonomy on the logical (|0⟩, |1⟩) basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Holonomy2 {
    matrix: CMat2,
}

impl Holonomy2 {
    pub fn new(matrix: CMat2) -> Result<Self> {
        let defect = unitarity_defect(&matrix);
        if defect > DEFAULT_UNITARITY_TOL {
            return Err(Error::UnitarityViolation {
                defect,
                tol: DEFAULT_UNITARITY_TOL,
            });
        }
        Ok(Self { matrix })
    }

    pub fn identity() -> Self {
        Self {
            matrix: CMat2::identity(),
        }
    }

    pub fn matrix(&self) -> &CMat2 {
        &self.matrix
    }

    pub fn apply(&self, state: &QubitState) -> QubitState {
        let v = self.matrix * nalgebra::Vector2::new(state.amplitude_0, state.amplitude_1);
        QubitState {
            amplitude_0: v[0],
            amplitude_1: v[1],
        }
    }

    /// Ordered composition: `other` acts after `self`.
    pub fn then(&self, other: &Holonomy2) -> Holonomy2 {
        Holonomy2 {
            matrix: other.matrix * self.matrix,
        }
    }

    pub fn max_abs_diff(&self, other: &Holonomy2) -> f64 {
        max_abs_diff2(&self.matrix, &other.matrix)
    }
}

/// Single-photon logical qubit state; `|0⟩` is the photon in L, `|1⟩` in R.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct QubitState {
    pub amplitude_0: C64,
    pub amplitude_1: C64,
}

impl QubitState {
    const NORM_TOL: f64 = 1e-9;

    pub fn new(amplitude_0: C64, amplitude_1: C64) -> Result<Self> {
        let norm_sq = amplitude_0.norm_sqr() + amplitude_1.norm_sqr();
        if (norm_sq - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::DegenerateState(format!(
                "|a0|² + |a1|² = {norm_sq}, expected 1"
            )));
        }
        Ok(Self {
            amplitude_0,
            amplitude_1,
        })
    }

    /// Rescale arbitrary amplitudes onto the unit sphere.
    pub fn normalized(amplitude_0: C64, amplitude_1: C64) -> Result<Self> {
        let norm = (amplitude_0.norm_sqr() + amplitude_1.norm_sqr()).sqrt();
        if norm <= f64::EPSILON {
            return Err(Error::DegenerateState("zero-norm state".into()));
        }
        Ok(Self {
            amplitude_0: amplitude_0 / norm,
            amplitude_1: amplitude_1 / norm,
        })
    }

    pub fn zero() -> Self {
        Self {
            amplitude_0: C64::new(1.0, 0.0),
            amplitude_1: C64::new(0.0, 0.0),
        }
    }

    pub fn one() -> Self {
        Self {
            amplitude_0: C64::new(0.0, 0.0),
            amplitude_1: C64::new(1.0, 0.0),
        }
    }

    pub fn prob_0(&self) -> f64 {
        self.amplitude_0.norm_sqr()
    }

    pub fn prob_1(&self) -> f64 {
        self.amplitude_1.norm_sqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gate_spec_normalizes_angles() {
        let g = GateSpec::new(-PI / 2.0, 5.0 * TAU + 0.25).unwrap();
        assert_abs_diff_eq!(g.theta(), 3.0 * PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.phi(), 0.25, epsilon = 1e-12);
        assert!(GateSpec::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn hamiltonian_constant_profile() {
        let one = C64::new(1.0, 0.0);
        let profile = CouplingProfile::new(vec![0.0, 1.0], vec![one; 2], vec![one; 2]).unwrap();
        let h = hamiltonian_at(&profile, 0.5).unwrap();
        for (r, c) in [(1, 0), (1, 2), (0, 1), (2, 1)] {
            assert_abs_diff_eq!(h[(r, c)].re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(h[(r, c)].im, 0.0, epsilon = 1e-15);
        }
        for (r, c) in [(0, 0), (1, 1), (2, 2), (0, 2), (2, 0)] {
            assert_eq!(h[(r, c)], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn hamiltonian_hadamard_weights() {
        // θ = 3π/4 at unit envelope: H[C,L] = sin(3π/8), H[C,R] = cos(3π/8)
        let gate = GateSpec::hadamard();
        let env = EnvelopeProfile::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let profile = CouplingProfile::from_gate_envelope(gate, &env);
        let h = hamiltonian_at(&profile, 0.3).unwrap();
        assert_abs_diff_eq!(h[(1, 0)].re, (3.0 * PI / 8.0).sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(h[(1, 0)].re, 0.923_879_532_511_286_7, epsilon = 1e-12);
        assert_abs_diff_eq!(h[(1, 2)].re, (3.0 * PI / 8.0).cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(h[(1, 2)].re, 0.382_683_432_365_089_8, epsilon = 1e-12);
    }

    #[test]
    fn hamiltonian_zero_envelope() {
        let gate = GateSpec::hadamard();
        let env = EnvelopeProfile::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let profile = CouplingProfile::from_gate_envelope(gate, &env);
        let h = hamiltonian_at(&profile, 0.5).unwrap();
        assert_eq!(max_abs_diff3(&h, &CMat3::zeros()), 0.0);
    }

    #[test]
    fn hamiltonian_rejects_out_of_range() {
        let one = C64::new(1.0, 0.0);
        let profile = CouplingProfile::new(vec![0.0, 1.0], vec![one; 2], vec![one; 2]).unwrap();
        assert!(matches!(
            hamiltonian_at(&profile, 1.5),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            hamiltonian_at(&profile, -0.1),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn hamiltonian_is_hermitian_for_complex_couplings() {
        let gate = GateSpec::new(1.234, 0.77).unwrap();
        let env = EnvelopeProfile::new(vec![0.0, 0.5, 1.0], vec![0.3, 2.0, 0.9]).unwrap();
        let profile = CouplingProfile::from_gate_envelope(gate, &env);
        for &z in &[0.0, 0.25, 0.5, 0.9, 1.0] {
            let h = hamiltonian_at(&profile, z).unwrap();
            let asym = max_abs_diff3(&h, &h.adjoint());
            assert!(asym <= 1e-12, "asymmetry {asym} at z={z}");
            assert_eq!(h[(0, 2)], C64::new(0.0, 0.0));
            assert_eq!(h[(2, 0)], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn factorized_profile_preserves_envelope_norm() {
        let gate = GateSpec::new(2.5, 1.1).unwrap();
        let env = EnvelopeProfile::new(vec![0.0, 0.4, 1.0], vec![0.2, 1.7, 0.0]).unwrap();
        let profile = CouplingProfile::from_gate_envelope(gate, &env);
        for i in 0..env.z_grid().len() {
            let sum = profile.kappa_l()[i].norm_sqr() + profile.kappa_r()[i].norm_sqr();
            assert_abs_diff_eq!(sum, env.omega()[i] * env.omega()[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(EnvelopeProfile::new(vec![0.0], vec![1.0]).is_err());
        assert!(EnvelopeProfile::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(EnvelopeProfile::new(vec![1.0, 0.5], vec![1.0, 1.0]).is_err());
        assert!(EnvelopeProfile::new(vec![0.0, 1.0], vec![-0.1, 1.0]).is_err());
        assert!(EnvelopeProfile::new(vec![0.0, 1.0], vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn unitary3_validation() {
        assert!(Unitary3::new(CMat3::identity()).is_ok());
        let mut bad = CMat3::identity();
        bad[(0, 0)] = C64::new(1.0 + 1e-6, 0.0);
        assert!(matches!(
            Unitary3::new(bad),
            Err(Error::UnitarityViolation { .. })
        ));
    }

    #[test]
    fn qubit_state_normalization() {
        let s = QubitState::normalized(C64::new(3.0, 0.0), C64::new(4.0, 0.0)).unwrap();
        assert_abs_diff_eq!(s.prob_0(), 0.36, epsilon = 1e-12);
        assert_abs_diff_eq!(s.prob_1(), 0.64, epsilon = 1e-12);
        assert!(QubitState::new(C64::new(0.9, 0.0), C64::new(0.0, 0.0)).is_err());
        assert!(QubitState::normalized(C64::new(0.0, 0.0), C64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn interpolation_midpoint() {
        let env = EnvelopeProfile::new(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert_abs_diff_eq!(env.omega_at(0.25).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(env.omega_at(1.0).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(env.omega_at(0.0).unwrap(), 0.0, epsilon = 1e-15);
    }
}
