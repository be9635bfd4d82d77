//! Few-photon multimode Fock states with complex amplitudes.
//!
//! States are stored sparsely as a map from occupation kets to amplitudes.
//! Every operation returns a new state; nothing is mutated in place once a
//! state has been handed out.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// Default cap on the total photon number of a state.
pub const DEFAULT_N_MAX: u32 = 4;

/// Amplitudes with magnitude at or below this are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("total photon number {total} exceeds truncation n_max = {n_max}")]
    TruncationExceeded { total: u32, n_max: u32 },
    #[error("mode {mode} out of range for a state with {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("modes must be distinct (got {0} twice)")]
    IdenticalModes(usize),
    #[error("mode count mismatch: {0} vs {1}")]
    ModeCountMismatch(usize, usize),
    #[error("occupation vector has {got} entries but the state has {expected} modes")]
    OccupationLength { got: usize, expected: usize },
    #[error("target mode {0} is occupied and is not one of the transformed modes")]
    TargetOccupied(usize),
}

/// Photon counts, one entry per mode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationVector(Vec<u32>);

impl OccupationVector {
    pub fn new(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    pub fn vacuum(modes: usize) -> Self {
        Self(vec![0; modes])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, mode: usize) -> u32 {
        self.0[mode]
    }
}

impl From<Vec<u32>> for OccupationVector {
    fn from(v: Vec<u32>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[u32; N]> for OccupationVector {
    fn from(v: [u32; N]) -> Self {
        Self(v.to_vec())
    }
}

impl fmt::Display for OccupationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "⟩")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeKind {
    Signal,
    Environment,
}

/// A network mode together with its role. Environment modes always sit
/// after every signal mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub index: usize,
    pub kind: ModeKind,
}

/// Sparse state vector over occupation-number kets.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    kinds: Vec<ModeKind>,
    n_max: u32,
    amplitudes: BTreeMap<OccupationVector, Complex64>,
}

impl StateVector {
    /// The vacuum on `signal_modes` signal modes.
    pub fn vacuum(signal_modes: usize, n_max: u32) -> Self {
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(OccupationVector::vacuum(signal_modes), Complex64::new(1.0, 0.0));
        Self {
            kinds: vec![ModeKind::Signal; signal_modes],
            n_max,
            amplitudes,
        }
    }

    /// The zero vector (no kets) on `signal_modes` signal modes.
    pub fn zero(signal_modes: usize, n_max: u32) -> Self {
        Self {
            kinds: vec![ModeKind::Signal; signal_modes],
            n_max,
            amplitudes: BTreeMap::new(),
        }
    }

    /// A number state with unit amplitude on `occupations`; every mode is a
    /// signal mode.
    pub fn fock(occupations: impl Into<OccupationVector>, n_max: u32) -> Result<Self, FockError> {
        let occ = occupations.into();
        let total = occ.total();
        if total > n_max {
            return Err(FockError::TruncationExceeded { total, n_max });
        }
        let modes = occ.len();
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(occ, Complex64::new(1.0, 0.0));
        Ok(Self {
            kinds: vec![ModeKind::Signal; modes],
            n_max,
            amplitudes,
        })
    }

    /// `(|n,0⟩ + e^{i n phase}|0,n⟩)/√2` on `mode_a`, `mode_b` of a
    /// `modes`-mode register, all other modes empty.
    pub fn noon(
        n: u32,
        phase: f64,
        mode_a: usize,
        mode_b: usize,
        modes: usize,
        n_max: u32,
    ) -> Result<Self, FockError> {
        if mode_a == mode_b {
            return Err(FockError::IdenticalModes(mode_a));
        }
        for m in [mode_a, mode_b] {
            if m >= modes {
                return Err(FockError::ModeOutOfRange { mode: m, modes });
            }
        }
        if n > n_max {
            return Err(FockError::TruncationExceeded { total: n, n_max });
        }
        let norm = std::f64::consts::FRAC_1_SQRT_2;
        let mut a = vec![0; modes];
        a[mode_a] = n;
        let mut b = vec![0; modes];
        b[mode_b] = n;
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(OccupationVector(a), Complex64::new(norm, 0.0));
        amplitudes.insert(
            OccupationVector(b),
            Complex64::from_polar(norm, n as f64 * phase),
        );
        let mut state = Self {
            kinds: vec![ModeKind::Signal; modes],
            n_max,
            amplitudes,
        };
        // n = 0 collapses both kets onto the vacuum
        if n == 0 {
            state = Self::vacuum(modes, n_max);
        }
        Ok(state)
    }

    /// Builds a state from explicit kets. Repeated kets are summed.
    pub fn from_amplitudes<I>(kinds: Vec<ModeKind>, n_max: u32, kets: I) -> Result<Self, FockError>
    where
        I: IntoIterator<Item = (OccupationVector, Complex64)>,
    {
        check_layout(&kinds);
        let mut amplitudes: BTreeMap<OccupationVector, Complex64> = BTreeMap::new();
        for (occ, amp) in kets {
            if occ.len() != kinds.len() {
                return Err(FockError::OccupationLength {
                    got: occ.len(),
                    expected: kinds.len(),
                });
            }
            let total = occ.total();
            if total > n_max {
                return Err(FockError::TruncationExceeded { total, n_max });
            }
            *amplitudes.entry(occ).or_default() += amp;
        }
        let mut s = Self {
            kinds,
            n_max,
            amplitudes,
        };
        s.prune();
        Ok(s)
    }

    pub fn modes(&self) -> usize {
        self.kinds.len()
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn kinds(&self) -> &[ModeKind] {
        &self.kinds
    }

    pub fn mode(&self, index: usize) -> Result<ModeIndex, FockError> {
        self.check_mode(index)?;
        Ok(ModeIndex {
            index,
            kind: self.kinds[index],
        })
    }

    pub fn signal_modes(&self) -> usize {
        self.kinds.iter().filter(|k| **k == ModeKind::Signal).count()
    }

    pub fn environment_modes(&self) -> usize {
        self.modes() - self.signal_modes()
    }

    /// Number of stored (non-negligible) kets.
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OccupationVector, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn amplitude(&self, occ: &OccupationVector) -> Complex64 {
        self.amplitudes.get(occ).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    /// Returns the state scaled to unit norm; the zero vector is returned
    /// unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return self.clone();
        }
        self.scaled(Complex64::new(1.0 / n, 0.0))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for a in out.amplitudes.values_mut() {
            *a *= factor;
        }
        out.prune();
        out
    }

    /// Superposition `self + other`.
    pub fn plus(&self, other: &Self) -> Result<Self, FockError> {
        if self.kinds != other.kinds {
            return Err(FockError::ModeCountMismatch(self.modes(), other.modes()));
        }
        let mut out = self.clone();
        for (k, v) in &other.amplitudes {
            *out.amplitudes.entry(k.clone()).or_default() += v;
        }
        out.prune();
        Ok(out)
    }

    /// Applies `a†` on `mode`; the result is not renormalized.
    pub fn create(&self, mode: usize) -> Result<Self, FockError> {
        self.check_mode(mode)?;
        let mut out = BTreeMap::new();
        for (occ, amp) in &self.amplitudes {
            let total = occ.total() + 1;
            if total > self.n_max {
                return Err(FockError::TruncationExceeded {
                    total,
                    n_max: self.n_max,
                });
            }
            let mut next = occ.clone();
            let n = next.0[mode];
            next.0[mode] = n + 1;
            out.insert(next, amp * ((n + 1) as f64).sqrt());
        }
        Ok(self.with_amplitudes(out))
    }

    /// Applies `a` on `mode`; kets with that mode empty vanish.
    pub fn annihilate(&self, mode: usize) -> Result<Self, FockError> {
        self.check_mode(mode)?;
        let mut out = BTreeMap::new();
        for (occ, amp) in &self.amplitudes {
            let n = occ.0[mode];
            if n == 0 {
                continue;
            }
            let mut next = occ.clone();
            next.0[mode] = n - 1;
            out.insert(next, amp * (n as f64).sqrt());
        }
        Ok(self.with_amplitudes(out))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64, FockError> {
        if self.modes() != other.modes() {
            return Err(FockError::ModeCountMismatch(self.modes(), other.modes()));
        }
        // iterate the smaller map
        let (small, large, conj_small) = if self.len() <= other.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut acc = Complex64::default();
        for (k, a) in &small.amplitudes {
            if let Some(b) = large.amplitudes.get(k) {
                acc += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        Ok(acc)
    }

    /// `⟨N̂_mode⟩`, normalized by the state norm.
    pub fn number_expectation(&self, mode: usize) -> Result<f64, FockError> {
        self.check_mode(mode)?;
        let norm = self.norm_sqr();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let s: f64 = self
            .amplitudes
            .iter()
            .map(|(k, a)| k.0[mode] as f64 * a.norm_sqr())
            .sum();
        Ok(s / norm)
    }

    /// `⟨N̂_i N̂_j⟩` for distinct modes, normalized by the state norm.
    pub fn pair_expectation(&self, mode_i: usize, mode_j: usize) -> Result<f64, FockError> {
        if mode_i == mode_j {
            return Err(FockError::IdenticalModes(mode_i));
        }
        self.check_mode(mode_i)?;
        self.check_mode(mode_j)?;
        let norm = self.norm_sqr();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let s: f64 = self
            .amplitudes
            .iter()
            .map(|(k, a)| (k.0[mode_i] * k.0[mode_j]) as f64 * a.norm_sqr())
            .sum();
        Ok(s / norm)
    }

    /// Expected total photon number over every mode.
    pub fn total_number_expectation(&self) -> f64 {
        let norm = self.norm_sqr();
        if norm == 0.0 {
            return 0.0;
        }
        self.amplitudes
            .iter()
            .map(|(k, a)| k.total() as f64 * a.norm_sqr())
            .sum::<f64>()
            / norm
    }

    /// Appends `count` empty environment modes; returns the new state and
    /// the indices of the appended modes.
    pub fn with_environment_modes(&self, count: usize) -> (Self, Vec<usize>) {
        let start = self.modes();
        let mut kinds = self.kinds.clone();
        kinds.extend(std::iter::repeat_n(ModeKind::Environment, count));
        let amplitudes = self
            .amplitudes
            .iter()
            .map(|(k, a)| {
                let mut c = k.0.clone();
                c.extend(std::iter::repeat_n(0, count));
                (OccupationVector(c), *a)
            })
            .collect();
        (
            Self {
                kinds,
                n_max: self.n_max,
                amplitudes,
            },
            (start..start + count).collect(),
        )
    }

    /// Multiplies each ket by `e^{i n phase}` where `n` is the occupation of
    /// `mode`.
    pub fn with_mode_phase(&self, mode: usize, phase: f64) -> Result<Self, FockError> {
        self.check_mode(mode)?;
        let out = self
            .amplitudes
            .iter()
            .map(|(k, a)| (k.clone(), a * Complex64::from_polar(1.0, k.0[mode] as f64 * phase)))
            .collect();
        Ok(self.with_amplitudes(out))
    }

    /// Linear creation-operator substitution.
    ///
    /// Each entry `(input, images)` replaces `a†_input` by
    /// `Σ c_k a†_{out_k}` over `images`. Every output mode must either be
    /// one of the inputs or be empty in every ket.
    pub fn substitute_creation(
        &self,
        map: &[(usize, Vec<(usize, Complex64)>)],
    ) -> Result<Self, FockError> {
        let inputs: BTreeSet<usize> = map.iter().map(|(m, _)| *m).collect();
        if inputs.len() != map.len() {
            let dup = map
                .iter()
                .map(|(m, _)| *m)
                .find(|m| map.iter().filter(|(x, _)| x == m).count() > 1)
                .unwrap_or_default();
            return Err(FockError::IdenticalModes(dup));
        }
        let mut outputs: Vec<usize> = Vec::new();
        for (m, images) in map {
            self.check_mode(*m)?;
            for (o, _) in images {
                self.check_mode(*o)?;
                if !outputs.contains(o) {
                    outputs.push(*o);
                }
            }
        }
        outputs.sort_unstable();
        for o in &outputs {
            if !inputs.contains(o) && self.amplitudes.keys().any(|k| k.0[*o] != 0) {
                return Err(FockError::TargetOccupied(*o));
            }
        }
        // image of each input as a dense coefficient row over `outputs`
        let rows: Vec<(usize, Vec<Complex64>)> = map
            .iter()
            .map(|(m, images)| {
                let mut row = vec![Complex64::default(); outputs.len()];
                for (o, c) in images {
                    let pos = outputs.iter().position(|x| x == o).expect("collected above");
                    row[pos] += c;
                }
                (*m, row)
            })
            .collect();

        let mut out: BTreeMap<OccupationVector, Complex64> = BTreeMap::new();
        for (occ, amp) in &self.amplitudes {
            // |n⟩ = (a†)^n / √n! |0⟩ for every transformed mode
            let mut inv_norm = 1.0;
            let mut base = occ.clone();
            for (m, _) in &rows {
                inv_norm /= factorial(occ.0[*m]).sqrt();
                base.0[*m] = 0;
            }
            let mut poly: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
            poly.insert(vec![0; outputs.len()], amp * inv_norm);
            for (m, row) in &rows {
                for _ in 0..occ.0[*m] {
                    poly = multiply_linear(&poly, row);
                }
            }
            for (exps, coeff) in poly {
                let mut ket = base.clone();
                let mut weight = 1.0;
                for (pos, e) in exps.iter().enumerate() {
                    ket.0[outputs[pos]] += e;
                    weight *= factorial(*e).sqrt();
                }
                let total = ket.total();
                if total > self.n_max {
                    return Err(FockError::TruncationExceeded {
                        total,
                        n_max: self.n_max,
                    });
                }
                *out.entry(ket).or_default() += coeff * weight;
            }
        }
        Ok(self.with_amplitudes(out))
    }

    /// Probability mass over signal-mode occupations, summed over every
    /// environment occupation.
    pub fn signal_marginal(&self) -> BTreeMap<OccupationVector, f64> {
        let signal: Vec<usize> = self
            .kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == ModeKind::Signal)
            .map(|(i, _)| i)
            .collect();
        let mut out: BTreeMap<OccupationVector, f64> = BTreeMap::new();
        for (k, a) in &self.amplitudes {
            let key = OccupationVector(signal.iter().map(|i| k.0[*i]).collect());
            *out.entry(key).or_default() += a.norm_sqr();
        }
        out
    }

    fn with_amplitudes(&self, amplitudes: BTreeMap<OccupationVector, Complex64>) -> Self {
        let mut s = Self {
            kinds: self.kinds.clone(),
            n_max: self.n_max,
            amplitudes,
        };
        s.prune();
        s
    }

    fn prune(&mut self) {
        self.amplitudes.retain(|_, a| a.norm() > PRUNE_THRESHOLD);
    }

    fn check_mode(&self, mode: usize) -> Result<(), FockError> {
        if mode >= self.modes() {
            Err(FockError::ModeOutOfRange {
                mode,
                modes: self.modes(),
            })
        } else {
            Ok(())
        }
    }
}

fn check_layout(kinds: &[ModeKind]) {
    let first_env = kinds.iter().position(|k| *k == ModeKind::Environment);
    if let Some(p) = first_env {
        assert!(
            kinds[p..].iter().all(|k| *k == ModeKind::Environment),
            "environment modes must follow all signal modes"
        );
    }
}

fn multiply_linear(
    poly: &BTreeMap<Vec<u32>, Complex64>,
    row: &[Complex64],
) -> BTreeMap<Vec<u32>, Complex64> {
    let mut out: BTreeMap<Vec<u32>, Complex64> = BTreeMap::new();
    for (exps, c) in poly {
        for (pos, r) in row.iter().enumerate() {
            if *r == Complex64::default() {
                continue;
            }
            let mut e = exps.clone();
            e[pos] += 1;
            *out.entry(e).or_default() += c * r;
        }
    }
    out
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    const TOL: f64 = 1e-12;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fock_two_zero_is_normalized() {
        let s = StateVector::fock([2, 0], DEFAULT_N_MAX).unwrap();
        assert_eq!(s.amplitude(&[2, 0].into()), c(1.0, 0.0));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fock_vacuum() {
        let s = StateVector::fock([0, 0], DEFAULT_N_MAX).unwrap();
        assert_eq!(s, StateVector::vacuum(2, DEFAULT_N_MAX));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fock_one_one_number_operators() {
        let s = StateVector::fock([1, 1], DEFAULT_N_MAX).unwrap();
        assert_eq!(s.number_expectation(0).unwrap(), 1.0);
        assert_eq!(s.number_expectation(1).unwrap(), 1.0);
        assert_eq!(s.pair_expectation(0, 1).unwrap(), 1.0);
    }

    #[test]
    fn fock_truncation_is_an_error() {
        assert_eq!(
            StateVector::fock([3, 2], 4),
            Err(FockError::TruncationExceeded { total: 5, n_max: 4 })
        );
    }

    #[test]
    fn noon_two_photons() {
        let s = StateVector::noon(2, 0.0, 0, 1, 2, DEFAULT_N_MAX).unwrap();
        assert!((s.amplitude(&[2, 0].into()) - c(FRAC_1_SQRT_2, 0.0)).norm() < TOL);
        assert!((s.amplitude(&[0, 2].into()) - c(FRAC_1_SQRT_2, 0.0)).norm() < TOL);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        assert!((s.number_expectation(0).unwrap() - 1.0).abs() < TOL);
        assert!((s.number_expectation(1).unwrap() - 1.0).abs() < TOL);
    }

    #[test]
    fn noon_single_particle() {
        let s = StateVector::noon(1, 0.0, 0, 1, 2, DEFAULT_N_MAX).unwrap();
        assert!((s.amplitude(&[1, 0].into()) - c(FRAC_1_SQRT_2, 0.0)).norm() < TOL);
        assert!((s.amplitude(&[0, 1].into()) - c(FRAC_1_SQRT_2, 0.0)).norm() < TOL);
    }

    #[test]
    fn noon_phase_is_multiplied_by_n() {
        let s = StateVector::noon(2, FRAC_PI_2, 0, 1, 2, DEFAULT_N_MAX).unwrap();
        let ratio = s.amplitude(&[0, 2].into()) / s.amplitude(&[2, 0].into());
        assert!((ratio - c(-1.0, 0.0)).norm() < TOL);
    }

    #[test]
    fn noon_errors() {
        assert_eq!(
            StateVector::noon(2, 0.0, 1, 1, 2, 4),
            Err(FockError::IdenticalModes(1))
        );
        assert!(matches!(
            StateVector::noon(5, 0.0, 0, 1, 2, 4),
            Err(FockError::TruncationExceeded { .. })
        ));
    }

    #[test]
    fn creation_ladder() {
        let vac = StateVector::vacuum(2, DEFAULT_N_MAX);
        let one = vac.create(0).unwrap();
        assert_eq!(one.amplitude(&[1, 0].into()), c(1.0, 0.0));
        let two = one.create(0).unwrap();
        assert!((two.amplitude(&[2, 0].into()) - c(2f64.sqrt(), 0.0)).norm() < TOL);
        let n = two.normalized();
        assert!((n.amplitude(&[2, 0].into()) - c(1.0, 0.0)).norm() < TOL);
    }

    #[test]
    fn creation_past_truncation_fails() {
        let s = StateVector::fock([1, 1], 2).unwrap();
        assert!(matches!(
            s.create(0),
            Err(FockError::TruncationExceeded { total: 3, n_max: 2 })
        ));
    }

    #[test]
    fn annihilation_ladder() {
        let one = StateVector::fock([1], 4).unwrap();
        assert_eq!(one.annihilate(0).unwrap().amplitude(&[0].into()), c(1.0, 0.0));
        let vac = StateVector::vacuum(1, 4);
        assert!(vac.annihilate(0).unwrap().is_empty());
        let two = StateVector::fock([2, 0], 4).unwrap();
        let n = two.annihilate(0).unwrap().create(0).unwrap();
        assert!((n.amplitude(&[2, 0].into()) - c(2.0, 0.0)).norm() < TOL);
    }

    #[test]
    fn inner_products() {
        let a = StateVector::fock([2, 0], 4).unwrap();
        let b = StateVector::fock([0, 2], 4).unwrap();
        assert_eq!(a.inner(&b).unwrap(), Complex64::default());
        let n0 = StateVector::noon(2, 0.0, 0, 1, 2, 4).unwrap();
        let n1 = StateVector::noon(2, FRAC_PI_2, 0, 1, 2, 4).unwrap();
        assert!((n0.inner(&n0).unwrap() - c(1.0, 0.0)).norm() < TOL);
        // (1 + e^{iπ}) / 2
        assert!(n0.inner(&n1).unwrap().norm() < TOL);
        let three = StateVector::vacuum(3, 4);
        assert!(matches!(
            a.inner(&three),
            Err(FockError::ModeCountMismatch(2, 3))
        ));
    }

    #[test]
    fn pair_expectation_rejects_identical_modes() {
        let s = StateVector::fock([1, 1], 4).unwrap();
        assert_eq!(s.pair_expectation(1, 1), Err(FockError::IdenticalModes(1)));
        assert_eq!(StateVector::fock([2, 0], 4).unwrap().pair_expectation(0, 1).unwrap(), 0.0);
    }

    #[test]
    fn environment_modes_are_appended() {
        let s = StateVector::fock([1, 0], 4).unwrap();
        let (e, idx) = s.with_environment_modes(2);
        assert_eq!(idx, vec![2, 3]);
        assert_eq!(e.signal_modes(), 2);
        assert_eq!(e.environment_modes(), 2);
        assert_eq!(e.mode(3).unwrap().kind, ModeKind::Environment);
        assert_eq!(e.amplitude(&[1, 0, 0, 0].into()), c(1.0, 0.0));
    }

    #[test]
    fn substitution_rejects_occupied_targets() {
        let s = StateVector::fock([1, 1], 4).unwrap();
        let r = s.substitute_creation(&[(0, vec![(1, c(1.0, 0.0))])]);
        assert_eq!(r, Err(FockError::TargetOccupied(1)));
    }

    #[test]
    fn substitution_swap_is_permutation() {
        let s = StateVector::fock([2, 1], 4).unwrap();
        let swapped = s
            .substitute_creation(&[(0, vec![(1, c(1.0, 0.0))]), (1, vec![(0, c(1.0, 0.0))])])
            .unwrap();
        assert!((swapped.amplitude(&[1, 2].into()) - c(1.0, 0.0)).norm() < TOL);
    }

    #[test]
    fn marginal_sums_environment() {
        let s = StateVector::from_amplitudes(
            vec![ModeKind::Signal, ModeKind::Environment],
            4,
            [
                (OccupationVector::from([1, 0]), c(0.6, 0.0)),
                (OccupationVector::from([0, 1]), c(0.0, 0.8)),
            ],
        )
        .unwrap();
        let m = s.signal_marginal();
        assert!((m[&OccupationVector::from([1])] - 0.36).abs() < TOL);
        assert!((m[&OccupationVector::from([0])] - 0.64).abs() < TOL);
    }
}
