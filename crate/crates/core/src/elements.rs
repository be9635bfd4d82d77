//! Linear network elements acting on Fock states.
//!
//! Every element is applied by substituting the creation operators of its
//! input modes. Loss is modelled by purification: a lossy element is
//! embedded in a larger unitary that couples the signal modes to freshly
//! appended environment modes, which are traced out only when a measurement
//! distribution is formed.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{FockError, OccupationVector, StateVector};

/// Tolerance for the lossless/passivity classification.
pub const CLASSIFY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElementError {
    #[error("beamsplitter is not passive: largest singular value {0} exceeds 1")]
    NotPassive(f64),
    #[error("wavelength must be positive, got {0} nm")]
    NonPositiveWavelength(f64),
    #[error("propagation needs k_imag >= 0 and distance >= 0 (got k_imag = {k_imag}, distance = {distance})")]
    InvalidPropagation { k_imag: f64, distance: f64 },
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Result of checking a beamsplitter against passivity and the lossless
/// reciprocity relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Lossless,
    Lossy,
    Invalid,
}

/// Relative phase between reflection and transmission, `r = factor · t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseRelation {
    /// r = +t
    Plus,
    /// r = −t
    Minus,
    /// r = +i t
    PlusI,
    /// r = −i t
    MinusI,
}

impl PhaseRelation {
    pub const ALL: [PhaseRelation; 4] = [Self::Plus, Self::Minus, Self::PlusI, Self::MinusI];

    pub fn factor(self) -> Complex64 {
        match self {
            Self::Plus => Complex64::new(1.0, 0.0),
            Self::Minus => Complex64::new(-1.0, 0.0),
            Self::PlusI => Complex64::new(0.0, 1.0),
            Self::MinusI => Complex64::new(0.0, -1.0),
        }
    }
}

/// Symmetric two-port splitter with matrix `[[t, r], [r, t]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamsplitterSpec {
    pub t: Complex64,
    pub r: Complex64,
}

impl BeamsplitterSpec {
    pub fn new(t: Complex64, r: Complex64) -> Self {
        Self { t, r }
    }

    /// Lossless 50:50 splitter with `t = 1/√2`, `r = i/√2`.
    pub fn balanced_lossless() -> Self {
        Self::new(
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            Complex64::new(0.0, FRAC_1_SQRT_2),
        )
    }

    /// Real `t` with the given `|t|²`, `r = relation · t · |r|/|t|`.
    pub fn with_relation(t_power: f64, r_power: f64, relation: PhaseRelation) -> Self {
        let t = Complex64::new(t_power.sqrt(), 0.0);
        Self::new(t, relation.factor() * r_power.sqrt())
    }

    /// 50% absorbing splitter, `|t|² = |r|² = 1/4`.
    pub fn half_absorbing(relation: PhaseRelation) -> Self {
        Self::with_relation(0.25, 0.25, relation)
    }

    pub fn identity() -> Self {
        Self::new(Complex64::new(1.0, 0.0), Complex64::default())
    }

    pub fn matrix(&self) -> Matrix2<Complex64> {
        Matrix2::new(self.t, self.r, self.r, self.t)
    }

    /// Singular values of `[[t, r], [r, t]]`, i.e. `(|t + r|, |t − r|)`.
    ///
    /// The matrix is normal with eigenvectors `(1, ±1)/√2`, so its singular
    /// values are the moduli of its eigenvalues.
    pub fn singular_values(&self) -> (f64, f64) {
        ((self.t + self.r).norm(), (self.t - self.r).norm())
    }

    pub fn classify(&self) -> Classification {
        let (s_plus, s_minus) = self.singular_values();
        if s_plus.max(s_minus) > 1.0 + CLASSIFY_TOL {
            return Classification::Invalid;
        }
        let power = self.t.norm_sqr() + self.r.norm_sqr();
        let cross = self.t * self.r.conj() + self.t.conj() * self.r;
        if (power - 1.0).abs() <= CLASSIFY_TOL && cross.norm() <= CLASSIFY_TOL {
            Classification::Lossless
        } else {
            Classification::Lossy
        }
    }

    pub fn is_lossless(&self) -> bool {
        self.classify() == Classification::Lossless
    }

    /// 4×4 unitary over `(signal 3, signal 4, env 1, env 2)` whose top-left
    /// block is the splitter matrix.
    pub fn dilate(&self) -> Result<Dilation, ElementError> {
        let class = self.classify();
        if class == Classification::Invalid {
            let (a, b) = self.singular_values();
            return Err(ElementError::NotPassive(a.max(b)));
        }
        let s = self.matrix();
        let (s_plus, s_minus) = self.singular_values();
        // defect operator sqrt(I − S†S) in the (1, ±1)/√2 eigenbasis
        let d_plus = (1.0 - s_plus * s_plus).max(0.0).sqrt();
        let d_minus = (1.0 - s_minus * s_minus).max(0.0).sqrt();
        let defect = Matrix2::new(
            0.5 * (d_plus + d_minus),
            0.5 * (d_plus - d_minus),
            0.5 * (d_plus - d_minus),
            0.5 * (d_plus + d_minus),
        )
        .map(|x| Complex64::new(x, 0.0));
        // environment-input columns are free up to a unitary; for a lossless
        // splitter pick them so the environment block is the identity
        let env_block = if class == Classification::Lossless {
            Matrix2::identity()
        } else {
            -s.adjoint()
        };
        let mut u = Matrix4::<Complex64>::zeros();
        u.fixed_view_mut::<2, 2>(0, 0).copy_from(&s);
        u.fixed_view_mut::<2, 2>(0, 2).copy_from(&defect);
        u.fixed_view_mut::<2, 2>(2, 0).copy_from(&defect);
        u.fixed_view_mut::<2, 2>(2, 2).copy_from(&env_block);
        Ok(Dilation { matrix: u })
    }
}

/// Unitary embedding of a passive two-port splitter.
#[derive(Debug, Clone, PartialEq)]
pub struct Dilation {
    matrix: Matrix4<Complex64>,
}

impl Dilation {
    /// Wraps an arbitrary matrix without checking it. Used to build negative
    /// controls for the unitarity checks.
    pub fn from_matrix_unchecked(matrix: Matrix4<Complex64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.matrix
    }

    /// Largest entry of `|U†U − I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.matrix.adjoint() * self.matrix;
        (prod - Matrix4::identity())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    /// A different but equivalent completion: the environment output rows
    /// are mixed by the 2×2 unitary `v`.
    pub fn with_environment_rotation(&self, v: &Matrix2<Complex64>) -> Self {
        let mut block = Matrix4::<Complex64>::identity();
        block.fixed_view_mut::<2, 2>(2, 2).copy_from(v);
        Self {
            matrix: block * self.matrix,
        }
    }

    /// True when the off-diagonal signal/environment blocks vanish.
    pub fn environment_decoupled(&self, tol: f64) -> bool {
        let off = self
            .matrix
            .fixed_view::<2, 2>(0, 2)
            .iter()
            .chain(self.matrix.fixed_view::<2, 2>(2, 0).iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        off <= tol
    }
}

/// Lossy propagation over `distance` with complex wavevector
/// `k_real + i k_imag`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationSpec {
    pub k_real: f64,
    pub k_imag: f64,
    pub distance: f64,
}

impl PropagationSpec {
    pub fn new(k_real: f64, k_imag: f64, distance: f64) -> Result<Self, ElementError> {
        let spec = Self {
            k_real,
            k_imag,
            distance,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Zero-length segment.
    pub fn none() -> Self {
        Self {
            k_real: 0.0,
            k_imag: 0.0,
            distance: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ElementError> {
        if !(self.k_imag >= 0.0 && self.distance >= 0.0) || !self.k_real.is_finite() {
            return Err(ElementError::InvalidPropagation {
                k_imag: self.k_imag,
                distance: self.distance,
            });
        }
        Ok(())
    }

    /// Single-particle amplitude `exp(i k d)`.
    pub fn transmission(&self) -> Complex64 {
        (Complex64::new(-self.k_imag, self.k_real) * self.distance).exp()
    }
}

/// Path difference converted to an interferometer phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    /// Path difference in nm.
    pub delay: f64,
    /// Wavelength in nm.
    pub wavelength: f64,
}

/// `2π · delay / wavelength`.
pub fn phase_of(spec: PhaseSpec) -> Result<f64, ElementError> {
    if !(spec.wavelength > 0.0) {
        return Err(ElementError::NonPositiveWavelength(spec.wavelength));
    }
    Ok(TAU * spec.delay / spec.wavelength)
}

/// Applies the splitter to `mode_1`, `mode_2`. Lossy splitters first append
/// two environment modes.
pub fn apply_beamsplitter(
    state: &StateVector,
    mode_1: usize,
    mode_2: usize,
    spec: &BeamsplitterSpec,
) -> Result<StateVector, ElementError> {
    if mode_1 == mode_2 {
        return Err(FockError::IdenticalModes(mode_1).into());
    }
    match spec.classify() {
        Classification::Invalid => {
            let (a, b) = spec.singular_values();
            Err(ElementError::NotPassive(a.max(b)))
        }
        Classification::Lossless => {
            // a1† → t a3† + r a4†, a2† → r a3† + t a4†
            let map = [
                (mode_1, vec![(mode_1, spec.t), (mode_2, spec.r)]),
                (mode_2, vec![(mode_1, spec.r), (mode_2, spec.t)]),
            ];
            Ok(state.substitute_creation(&map)?)
        }
        Classification::Lossy => apply_dilation(state, mode_1, mode_2, &spec.dilate()?),
    }
}

/// Applies an explicit dilation, always appending two environment modes.
pub fn apply_dilation(
    state: &StateVector,
    mode_1: usize,
    mode_2: usize,
    dilation: &Dilation,
) -> Result<StateVector, ElementError> {
    if mode_1 == mode_2 {
        return Err(FockError::IdenticalModes(mode_1).into());
    }
    let (extended, env) = state.with_environment_modes(2);
    let targets = [mode_1, mode_2, env[0], env[1]];
    let u = dilation.matrix();
    // a_in,j† = Σ_k U_kj a_out,k† ; environment inputs are vacuum
    let column = |j: usize| -> Vec<(usize, Complex64)> {
        (0..4).map(|k| (targets[k], u[(k, j)])).collect()
    };
    let map = [(mode_1, column(0)), (mode_2, column(1))];
    Ok(extended.substitute_creation(&map)?)
}

/// Multiplies each ket by `e^{i n phase}` for the occupation `n` of `mode`.
pub fn apply_phase(state: &StateVector, mode: usize, phase: f64) -> Result<StateVector, ElementError> {
    Ok(state.with_mode_phase(mode, phase)?)
}

/// Propagation segment as a single splitter against one fresh environment
/// mode.
pub fn apply_propagation(
    state: &StateVector,
    mode: usize,
    spec: &PropagationSpec,
) -> Result<StateVector, ElementError> {
    spec.validate()?;
    let t = spec.transmission();
    let leak = (1.0 - t.norm_sqr()).max(0.0).sqrt();
    let (extended, env) = state.with_environment_modes(1);
    let map = [(mode, vec![(mode, t), (env[0], Complex64::new(leak, 0.0))])];
    Ok(extended.substitute_creation(&map)?)
}

/// Probability of each signal occupation, summed over the environment.
pub fn marginal_signal_distribution(state: &StateVector) -> BTreeMap<OccupationVector, f64> {
    state.signal_marginal()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::DEFAULT_N_MAX;
    use std::f64::consts::{LN_2, PI};

    const TOL: f64 = 1e-12;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phase_of_examples() {
        let p = |delay| phase_of(PhaseSpec { delay, wavelength: 806.0 }).unwrap();
        assert!((p(806.0) - 2.0 * PI).abs() < TOL);
        assert_eq!(p(0.0), 0.0);
        assert!((p(201.5) - PI / 2.0).abs() < TOL);
        assert_eq!(
            phase_of(PhaseSpec { delay: 1.0, wavelength: 0.0 }),
            Err(ElementError::NonPositiveWavelength(0.0))
        );
    }

    #[test]
    fn classification_examples() {
        assert_eq!(BeamsplitterSpec::balanced_lossless().classify(), Classification::Lossless);
        let half = BeamsplitterSpec::new(c(0.5, 0.0), c(0.5, 0.0));
        assert_eq!(half.classify(), Classification::Lossy);
        let gain = BeamsplitterSpec::new(c(1.0, 0.0), c(1.0, 0.0));
        assert_eq!(gain.classify(), Classification::Invalid);
        assert!(matches!(gain.dilate(), Err(ElementError::NotPassive(_))));
    }

    #[test]
    fn lossless_dilation_decouples_environment() {
        let d = BeamsplitterSpec::balanced_lossless().dilate().unwrap();
        assert!(d.is_unitary(TOL));
        assert!(d.environment_decoupled(TOL));
        let env = d.matrix().fixed_view::<2, 2>(2, 2).into_owned();
        assert!((env - Matrix2::identity()).iter().all(|z| z.norm() < TOL));
    }

    #[test]
    fn half_absorbing_dilation() {
        let spec = BeamsplitterSpec::new(c(0.5, 0.0), c(0.5, 0.0));
        let d = spec.dilate().unwrap();
        assert!(d.is_unitary(TOL));
        let u = d.matrix();
        for col in 0..2 {
            let total: f64 = (0..4).map(|k| u[(k, col)].norm_sqr()).sum();
            let env: f64 = (2..4).map(|k| u[(k, col)].norm_sqr()).sum();
            assert!((total - 1.0).abs() < TOL);
            assert!((env - 0.5).abs() < TOL);
        }
        let top = u.fixed_view::<2, 2>(0, 0).into_owned();
        assert!((top - spec.matrix()).iter().all(|z| z.norm() < TOL));
    }

    #[test]
    fn full_absorber_dilation() {
        let d = BeamsplitterSpec::new(c(0.0, 0.0), c(0.0, 0.0)).dilate().unwrap();
        assert!(d.is_unitary(TOL));
        let u = d.matrix();
        assert!(u.fixed_view::<2, 2>(0, 0).iter().all(|z| z.norm() < TOL));
    }

    #[test]
    fn single_photon_splits_into_t_and_r() {
        let spec = BeamsplitterSpec::new(c(0.3, 0.2), c(-0.1, 0.5));
        let s = StateVector::fock([1, 0], DEFAULT_N_MAX).unwrap();
        let out = apply_beamsplitter(&s, 0, 1, &spec).unwrap();
        assert_eq!(out.modes(), 4);
        assert!((out.amplitude(&[1, 0, 0, 0].into()) - spec.t).norm() < TOL);
        assert!((out.amplitude(&[0, 1, 0, 0].into()) - spec.r).norm() < TOL);
        assert!((out.norm_sqr() - 1.0).abs() < TOL);
    }

    #[test]
    fn identity_splitter_is_identity() {
        let s = StateVector::noon(2, 0.3, 0, 1, 2, DEFAULT_N_MAX).unwrap();
        let out = apply_beamsplitter(&s, 0, 1, &BeamsplitterSpec::identity()).unwrap();
        assert_eq!(out.modes(), 2);
        assert!((out.inner(&s).unwrap().norm() - 1.0).abs() < TOL);
    }

    #[test]
    fn hong_ou_mandel_coalescence() {
        let s = StateVector::fock([1, 1], DEFAULT_N_MAX).unwrap();
        let out = apply_beamsplitter(&s, 0, 1, &BeamsplitterSpec::balanced_lossless()).unwrap();
        let expect = c(0.0, FRAC_1_SQRT_2);
        assert!((out.amplitude(&[2, 0].into()) - expect).norm() < TOL);
        assert!((out.amplitude(&[0, 2].into()) - expect).norm() < TOL);
        assert!(out.amplitude(&[1, 1].into()).norm() < TOL);
    }

    #[test]
    fn phase_examples() {
        let two = StateVector::fock([2], DEFAULT_N_MAX).unwrap();
        let out = apply_phase(&two, 0, 0.4).unwrap();
        assert!((out.amplitude(&[2].into()) - Complex64::from_polar(1.0, 0.8)).norm() < TOL);
        assert_eq!(apply_phase(&two, 0, 0.0).unwrap(), two);
        let one = StateVector::fock([1], DEFAULT_N_MAX).unwrap();
        let out = apply_phase(&one, 0, PI).unwrap();
        assert!((out.amplitude(&[1].into()) - c(-1.0, 0.0)).norm() < TOL);
    }

    #[test]
    fn propagation_halves_single_photon() {
        let spec = PropagationSpec::new(0.01, LN_2 / 2.0 / 100.0, 100.0).unwrap();
        let one = StateVector::fock([1], DEFAULT_N_MAX).unwrap();
        let out = apply_propagation(&one, 0, &spec).unwrap();
        let m = marginal_signal_distribution(&out);
        assert!((m[&OccupationVector::from([1])] - 0.5).abs() < TOL);
        assert!((m[&OccupationVector::from([0])] - 0.5).abs() < TOL);

        let two = StateVector::fock([2], DEFAULT_N_MAX).unwrap();
        let out = apply_propagation(&two, 0, &spec).unwrap();
        let m = marginal_signal_distribution(&out);
        assert!((m[&OccupationVector::from([2])] - 0.25).abs() < TOL);
    }

    #[test]
    fn lossless_propagation_is_pure_phase() {
        let spec = PropagationSpec::new(0.0078, 0.0, 5000.0).unwrap();
        let two = StateVector::fock([2], DEFAULT_N_MAX).unwrap();
        let out = apply_propagation(&two, 0, &spec).unwrap();
        let m = marginal_signal_distribution(&out);
        assert!((m[&OccupationVector::from([2])] - 1.0).abs() < TOL);
    }

    #[test]
    fn propagation_rejects_gain() {
        assert!(PropagationSpec::new(0.0, -1e-3, 10.0).is_err());
        assert!(PropagationSpec::new(0.0, 1e-3, -10.0).is_err());
    }

    #[test]
    fn lossless_marginal_is_squared_amplitudes() {
        let s = StateVector::noon(2, 0.7, 0, 1, 2, DEFAULT_N_MAX).unwrap();
        let spec = BeamsplitterSpec::with_relation(0.3, 0.7, PhaseRelation::MinusI);
        let out = apply_beamsplitter(&s, 0, 1, &spec).unwrap();
        assert_eq!(out.environment_modes(), 0);
        let m = marginal_signal_distribution(&out);
        for (k, a) in out.iter() {
            assert!((m[k] - a.norm_sqr()).abs() < TOL);
        }
    }

    #[test]
    fn noon_on_absorbing_splitter_loses_two_photon_weight() {
        // e^{2iφ} = −1: NOON relative phase π
        let s = StateVector::noon(2, PI / 2.0, 0, 1, 2, DEFAULT_N_MAX).unwrap();
        let spec = BeamsplitterSpec::new(c(0.5, 0.0), c(0.5, 0.0));
        let out = apply_beamsplitter(&s, 0, 1, &spec).unwrap();
        let two: f64 = marginal_signal_distribution(&out)
            .iter()
            .filter(|(k, _)| k.total() == 2)
            .map(|(_, p)| p)
            .sum();
        assert!(two < TOL);
    }

    #[test]
    fn environment_rotation_leaves_marginals_unchanged() {
        let spec = BeamsplitterSpec::with_relation(0.2, 0.15, PhaseRelation::Plus);
        let d = spec.dilate().unwrap();
        let v = Matrix2::new(
            c(0.6, 0.0),
            c(0.0, 0.8),
            c(0.0, 0.8),
            c(0.6, 0.0),
        );
        let d2 = d.with_environment_rotation(&v);
        assert!(d2.is_unitary(TOL));
        let s = StateVector::noon(2, 0.9, 0, 1, 2, DEFAULT_N_MAX).unwrap();
        let a = marginal_signal_distribution(&apply_dilation(&s, 0, 1, &d).unwrap());
        let b = marginal_signal_distribution(&apply_dilation(&s, 0, 1, &d2).unwrap());
        assert_eq!(a.len(), b.len());
        for (k, p) in &a {
            assert!((p - b[k]).abs() < TOL);
        }
    }
}
