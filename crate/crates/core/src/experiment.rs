//! The two-stage interferometer: a Hong–Ou–Mandel stage that prepares the
//! two-particle state, followed by a Mach–Zehnder stage closed by a
//! (possibly lossy) plasmonic splitter.
//!
//! The source emits a statistical mixture of pair types. Each pair type is
//! evolved exactly as a pure state; partially distinguishable photons carry
//! separate internal labels, realised as separate mode pairs, so that they
//! never interfere with each other. Outcome distributions of the branches
//! are averaged with their mixture weights.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements::{
    apply_beamsplitter, apply_phase, apply_propagation, phase_of, BeamsplitterSpec,
    Classification, ElementError, PhaseSpec, PropagationSpec,
};
use crate::fock::{FockError, StateVector, DEFAULT_N_MAX};
use num_complex::Complex64;

/// Tolerance on probability sums.
pub const PROBABILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Element(#[from] ElementError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error("invalid interferometer: {0}")]
    InvalidInterferometer(String),
    #[error("decay length needs n >= 1 and k_imag > 0 (got n = {n}, k_imag = {k_imag})")]
    NonPhysicalDecay { n: u32, k_imag: f64 },
    #[error("distribution is not normalized: total = {0}")]
    NotNormalized(f64),
}

/// Input port of the HOM splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Port {
    First,
    Second,
}

/// Photon-pair source.
///
/// * `overlap` — amplitude overlap η of the two photons' internal states;
///   a fraction `1 − η²` of coalescing pairs behaves as distinguishable.
/// * `bunching_fidelity` — fraction β of pairs that reach the HOM splitter
///   as a genuine pair. The remaining `1 − β` are unbunched events: two
///   independent photons whose partners were lost, each entering the HOM
///   stage through port 1 with probability `(1 + unbunched_port_bias)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub pair_rate: f64,
    pub overlap: f64,
    pub bunching_fidelity: f64,
    pub unbunched_port_bias: f64,
}

impl SourceModel {
    /// Indistinguishable pairs only.
    pub fn ideal(pair_rate: f64) -> Self {
        Self {
            pair_rate,
            overlap: 1.0,
            bunching_fidelity: 1.0,
            unbunched_port_bias: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |what: &str| Err(ExperimentError::InvalidSource(what.to_string()));
        if !(self.pair_rate >= 0.0 && self.pair_rate.is_finite()) {
            return bad("pair_rate must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return bad("overlap must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.bunching_fidelity) {
            return bad("bunching_fidelity must lie in [0, 1]");
        }
        if !(-1.0..=1.0).contains(&self.unbunched_port_bias) {
            return bad("unbunched_port_bias must lie in [-1, 1]");
        }
        Ok(())
    }
}

/// Amplitude overlap of two Gaussian wavepackets offset by `delay_nm`,
/// for use as `SourceModel::overlap` when the HOM delay is scanned.
pub fn gaussian_overlap(delay_nm: f64, coherence_length_nm: f64) -> f64 {
    let x = delay_nm / coherence_length_nm;
    (-0.5 * x * x).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferometerSpec {
    /// nm
    pub wavelength: f64,
    pub hom_splitter: BeamsplitterSpec,
    pub spbs: BeamsplitterSpec,
    /// Propagation in arm 1 and arm 2 ahead of the splitter.
    pub arm_propagation: [PropagationSpec; 2],
    /// Path differences δ in nm; strictly increasing.
    pub scan: Vec<f64>,
}

impl InterferometerSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |what: String| Err(ExperimentError::InvalidInterferometer(what));
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return bad(format!("wavelength must be positive, got {}", self.wavelength));
        }
        for (name, s) in [("hom_splitter", &self.hom_splitter), ("spbs", &self.spbs)] {
            if s.classify() == Classification::Invalid {
                return bad(format!("{name} is not passive"));
            }
        }
        for p in &self.arm_propagation {
            p.validate()?;
        }
        let quarter = self.wavelength / 4.0;
        for w in self.scan.windows(2) {
            let step = w[1] - w[0];
            if !(step > 0.0) {
                return bad("scan must be strictly increasing".to_string());
            }
            if step >= quarter {
                return bad(format!(
                    "scan step {step} nm violates the Nyquist rule: it must be below wavelength/4 = {quarter} nm"
                ));
            }
        }
        Ok(())
    }
}

/// Uniform grid `start, start + step, …` up to and including `stop`.
pub fn uniform_scan(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || stop < start {
        return Vec::new();
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

/// Joint distribution of signal photon counts `(n3, n4)` at the two output
/// slits.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    probs: BTreeMap<(u32, u32), f64>,
}

impl OutcomeDistribution {
    pub fn from_map(probs: BTreeMap<(u32, u32), f64>) -> Self {
        Self { probs }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(u32, u32), &f64)> {
        self.probs.iter()
    }

    pub fn get(&self, n3: u32, n4: u32) -> f64 {
        self.probs.get(&(n3, n4)).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let total = self.total();
        if self.probs.values().any(|p| *p < -PROBABILITY_TOL || !p.is_finite())
            || (total - 1.0).abs() > 1e-9
        {
            return Err(ExperimentError::NotNormalized(total));
        }
        Ok(())
    }

    /// Probability that both outputs hold at least one photon. For two-photon
    /// inputs this is `P(1₃, 1₄)`.
    pub fn coincidence(&self) -> f64 {
        self.probs
            .iter()
            .filter(|((a, b), _)| *a >= 1 && *b >= 1)
            .map(|(_, p)| p)
            .sum()
    }

    /// `⟨N̂₃ N̂₄⟩`.
    pub fn pair_expectation(&self) -> f64 {
        self.probs
            .iter()
            .map(|((a, b), p)| (a * b) as f64 * p)
            .sum()
    }

    /// `(⟨N̂₃⟩, ⟨N̂₄⟩)`.
    pub fn mean_counts(&self) -> (f64, f64) {
        self.probs.iter().fold((0.0, 0.0), |(x, y), ((a, b), p)| {
            (x + *a as f64 * p, y + *b as f64 * p)
        })
    }

    /// Distribution of the total number of signal photons.
    pub fn signal_number_distribution(&self) -> BTreeMap<u32, f64> {
        let mut out = BTreeMap::new();
        for ((a, b), p) in &self.probs {
            *out.entry(a + b).or_insert(0.0) += p;
        }
        out
    }

    fn accumulate(&mut self, other: &Self, weight: f64) {
        for (k, p) in &other.probs {
            *self.probs.entry(*k).or_insert(0.0) += weight * p;
        }
    }
}

/// `2|t|²|r|²(1 + cos 2φ)`.
pub fn coincidence_probability_analytic(
    t: Complex64,
    r: Complex64,
    phase: f64,
) -> Result<f64, ExperimentError> {
    check_passive(t, r)?;
    Ok(2.0 * t.norm_sqr() * r.norm_sqr() * (1.0 + (2.0 * phase).cos()))
}

/// Arm of the Mach–Zehnder stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    First,
    Second,
}

/// Output probabilities `(p₃, p₄)` of a single particle split equally over
/// both arms. `reference_arm` is the arm whose amplitude carries no delay
/// phase; the other arm carries `e^{iφ}`.
pub fn singles_probability_analytic(
    t: Complex64,
    r: Complex64,
    phase: f64,
    reference_arm: Arm,
) -> Result<(f64, f64), ExperimentError> {
    check_passive(t, r)?;
    let e = Complex64::from_polar(1.0, phase);
    let (w1, w2) = match reference_arm {
        Arm::First => (Complex64::new(1.0, 0.0), e),
        Arm::Second => (e, Complex64::new(1.0, 0.0)),
    };
    let p3 = (t * w1 + r * w2).norm_sqr() / 2.0;
    let p4 = (r * w1 + t * w2).norm_sqr() / 2.0;
    Ok((p3, p4))
}

/// Propagation distance over which an `n`-particle Fock state decays by 1/e:
/// `1/(2 n k_imag)`.
pub fn decay_length(n: u32, k_imag: f64) -> Result<f64, ExperimentError> {
    if n == 0 || !(k_imag > 0.0) || !k_imag.is_finite() {
        return Err(ExperimentError::NonPhysicalDecay { n, k_imag });
    }
    // single-particle length divided by n, so that the N-fold scaling is exact
    Ok((1.0 / (2.0 * k_imag)) / n as f64)
}

fn check_passive(t: Complex64, r: Complex64) -> Result<(), ExperimentError> {
    let spec = BeamsplitterSpec::new(t, r);
    match spec.classify() {
        Classification::Invalid => {
            let (a, b) = spec.singular_values();
            Err(ElementError::NotPassive(a.max(b)).into())
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchKind {
    /// Both photons share one internal label and interfere (η² of pairs).
    Coalescing,
    /// Partner photons with orthogonal internal labels (1 − η² of pairs).
    Distinguishable,
    /// Two independent photons from broken pairs.
    Unbunched { ports: [Port; 2] },
}

/// One pure-state component of the post-HOM mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub kind: BranchKind,
    pub weight: f64,
    pub state: StateVector,
    /// For each internal label, the (arm 1, arm 2) mode indices.
    pub labels: Vec<[usize; 2]>,
}

impl Branch {
    /// Arm photon-number distribution `(n_arm1, n_arm2)`, environment traced
    /// out and labels summed.
    pub fn arm_distribution(&self) -> OutcomeDistribution {
        let norm = self.state.norm_sqr();
        let mut probs = BTreeMap::new();
        for (occ, p) in self.state.signal_marginal() {
            let n1: u32 = self.labels.iter().map(|l| occ.get(l[0])).sum();
            let n2: u32 = self.labels.iter().map(|l| occ.get(l[1])).sum();
            *probs.entry((n1, n2)).or_insert(0.0) += p / norm;
        }
        OutcomeDistribution { probs }
    }
}

/// Weighted mixture of post-HOM states.
#[derive(Debug, Clone, PartialEq)]
pub struct HomMixture {
    pub branches: Vec<Branch>,
}

impl HomMixture {
    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }

    /// Mixture-averaged arm distribution.
    pub fn arm_distribution(&self) -> OutcomeDistribution {
        let mut out = OutcomeDistribution::default();
        for b in &self.branches {
            out.accumulate(&b.arm_distribution(), b.weight);
        }
        out
    }

    /// Probability of one photon in each arm (the HOM coincidence).
    pub fn unbunched_weight(&self) -> f64 {
        self.arm_distribution().get(1, 1)
    }

    /// Probability of both photons in the same arm.
    pub fn bunched_weight(&self) -> f64 {
        let d = self.arm_distribution();
        d.get(2, 0) + d.get(0, 2)
    }
}

/// Evolves the source's pair types through the HOM splitter.
pub fn hom_stage(source: &SourceModel, splitter: &BeamsplitterSpec) -> Result<HomMixture, ExperimentError> {
    source.validate()?;
    if splitter.classify() == Classification::Invalid {
        let (a, b) = splitter.singular_values();
        return Err(ElementError::NotPassive(a.max(b)).into());
    }
    let eta2 = source.overlap * source.overlap;
    let beta = source.bunching_fidelity;
    let q = 0.5 * (1.0 + source.unbunched_port_bias);

    let mut branches = Vec::new();
    let mut push = |kind: BranchKind, weight: f64, build: &dyn Fn() -> Result<(StateVector, Vec<[usize; 2]>), ExperimentError>| -> Result<(), ExperimentError> {
        if weight > 0.0 {
            let (state, labels) = build()?;
            branches.push(Branch {
                kind,
                weight,
                state,
                labels,
            });
        }
        Ok(())
    };

    push(BranchKind::Coalescing, beta * eta2, &|| {
        let s = StateVector::fock([1, 1], DEFAULT_N_MAX)?;
        Ok((apply_beamsplitter(&s, 0, 1, splitter)?, vec![[0, 1]]))
    })?;
    push(BranchKind::Distinguishable, beta * (1.0 - eta2), &|| {
        labeled_pair([Port::First, Port::Second], splitter)
    })?;
    for (ports, w) in [
        ([Port::First, Port::First], q * q),
        ([Port::First, Port::Second], q * (1.0 - q)),
        ([Port::Second, Port::First], (1.0 - q) * q),
        ([Port::Second, Port::Second], (1.0 - q) * (1.0 - q)),
    ] {
        push(BranchKind::Unbunched { ports }, (1.0 - beta) * w, &|| {
            labeled_pair(ports, splitter)
        })?;
    }
    Ok(HomMixture { branches })
}

/// Two photons with distinct internal labels A and B entering through the
/// given ports. Modes: `[A arm1, A arm2, B arm1, B arm2]`.
fn labeled_pair(
    ports: [Port; 2],
    splitter: &BeamsplitterSpec,
) -> Result<(StateVector, Vec<[usize; 2]>), ExperimentError> {
    let mut occ = [0u32; 4];
    for (label, port) in ports.iter().enumerate() {
        let offset = match port {
            Port::First => 0,
            Port::Second => 1,
        };
        occ[2 * label + offset] = 1;
    }
    let s = StateVector::fock(occ, DEFAULT_N_MAX)?;
    let s = apply_beamsplitter(&s, 0, 1, splitter)?;
    let s = apply_beamsplitter(&s, 2, 3, splitter)?;
    Ok((s, vec![[0, 1], [2, 3]]))
}

/// Exact outcome distribution at one scan point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// nm
    pub delta: f64,
    /// rad
    pub phase: f64,
    pub distribution: OutcomeDistribution,
}

impl ScanPoint {
    pub fn coincidence(&self) -> f64 {
        self.distribution.coincidence()
    }
}

/// Evolves every mixture branch through the Mach–Zehnder stage at each scan
/// point and returns the mixture-averaged outcome distributions, ordered as
/// `spec.scan`.
pub fn run_scan_exact(
    spec: &InterferometerSpec,
    source: &SourceModel,
) -> Result<Vec<ScanPoint>, ExperimentError> {
    spec.validate()?;
    let mixture = hom_stage(source, &spec.hom_splitter)?;
    let propagated = propagate_arms(&mixture, &spec.arm_propagation)?;
    spec.scan
        .par_iter()
        .map(|&delta| {
            let phase = phase_of(PhaseSpec {
                delay: delta,
                wavelength: spec.wavelength,
            })?;
            let distribution = mixture_outcome(&propagated, &spec.spbs, phase)?;
            Ok(ScanPoint {
                delta,
                phase,
                distribution,
            })
        })
        .collect()
}

/// Outcome distribution of a mixture at a single interferometer phase.
pub fn outcome_at_phase(
    spec: &InterferometerSpec,
    source: &SourceModel,
    phase: f64,
) -> Result<OutcomeDistribution, ExperimentError> {
    spec.validate()?;
    let mixture = hom_stage(source, &spec.hom_splitter)?;
    let propagated = propagate_arms(&mixture, &spec.arm_propagation)?;
    mixture_outcome(&propagated, &spec.spbs, phase)
}

fn propagate_arms(
    mixture: &HomMixture,
    arms: &[PropagationSpec; 2],
) -> Result<Vec<Branch>, ExperimentError> {
    mixture
        .branches
        .iter()
        .map(|b| {
            let mut state = b.state.clone();
            for label in &b.labels {
                for (arm, mode) in label.iter().enumerate() {
                    if arms[arm].distance > 0.0 {
                        state = apply_propagation(&state, *mode, &arms[arm])?;
                    }
                }
            }
            Ok(Branch {
                state,
                ..b.clone()
            })
        })
        .collect()
}

fn mixture_outcome(
    branches: &[Branch],
    spbs: &BeamsplitterSpec,
    phase: f64,
) -> Result<OutcomeDistribution, ExperimentError> {
    let mut out = OutcomeDistribution::default();
    for b in branches {
        let mut state = b.state.clone();
        for [m1, m2] in &b.labels {
            state = apply_phase(&state, *m2, phase)?;
            state = apply_beamsplitter(&state, *m1, *m2, spbs)?;
        }
        let evolved = Branch {
            state,
            ..b.clone()
        };
        out.accumulate(&evolved.arm_distribution(), b.weight);
    }
    Ok(out)
}
