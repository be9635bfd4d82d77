//! Photon-counting detection: Poisson pair events, finite-efficiency
//! detectors, dark counts and windowed accidental coincidences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{
    run_scan_exact, ExperimentError, InterferometerSpec, OutcomeDistribution, ScanPoint,
    SourceModel,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectionError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("invalid detector: {0}")]
    InvalidDetector(String),
    #[error("invalid acquisition: {0}")]
    InvalidAcquisition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub efficiency: f64,
    /// counts/s
    pub dark_rate: f64,
    /// ns
    pub window: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            efficiency: 0.6,
            dark_rate: 100.0,
            window: 10.0,
        }
    }
}

impl DetectorSpec {
    pub fn ideal(window: f64) -> Self {
        Self {
            efficiency: 1.0,
            dark_rate: 0.0,
            window,
        }
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        let bad = |m: &str| Err(DetectionError::InvalidDetector(m.to_string()));
        if !(0.0..=1.0).contains(&self.efficiency) {
            return bad("efficiency must lie in [0, 1]");
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return bad("dark_rate must be finite and >= 0");
        }
        if !(self.window > 0.0 && self.window.is_finite()) {
            return bad("window must be positive");
        }
        Ok(())
    }

    /// Probability of at least one click for `n` incident photons.
    pub fn click_probability(&self, n: u32) -> f64 {
        1.0 - (1.0 - self.efficiency).powi(n as i32)
    }
}

/// Detector A watches output 3, detector B output 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorPair {
    pub a: DetectorSpec,
    pub b: DetectorSpec,
}

impl DetectorPair {
    pub fn matched(spec: DetectorSpec) -> Self {
        Self { a: spec, b: spec }
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        self.a.validate()?;
        self.b.validate()
    }

    /// Coincidence window, the wider of the two.
    pub fn window(&self) -> f64 {
        self.a.window.max(self.b.window)
    }

    /// Per-event probabilities of (both, A only, B only) clicking.
    pub fn event_probabilities(&self, dist: &OutcomeDistribution) -> [f64; 3] {
        let mut both = 0.0;
        let mut a_only = 0.0;
        let mut b_only = 0.0;
        for ((n3, n4), p) in dist.iter() {
            let pa = self.a.click_probability(*n3);
            let pb = self.b.click_probability(*n4);
            both += p * pa * pb;
            a_only += p * pa * (1.0 - pb);
            b_only += p * (1.0 - pa) * pb;
        }
        [both, a_only, b_only]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    /// nm
    pub delta: f64,
    pub counts_a: u64,
    pub counts_b: u64,
    pub coincidences: u64,
    /// s
    pub duration: f64,
}

/// Counts expected at one scan point, accidentals included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedCounts {
    pub counts_a: f64,
    pub counts_b: f64,
    pub true_coincidences: f64,
    pub accidentals: f64,
}

impl ExpectedCounts {
    pub fn coincidences(&self) -> f64 {
        self.true_coincidences + self.accidentals
    }
}

pub fn expected_counts(
    dist: &OutcomeDistribution,
    pair_rate: f64,
    duration: f64,
    detectors: &DetectorPair,
) -> ExpectedCounts {
    let n = pair_rate * duration;
    let [both, a_only, b_only] = detectors.event_probabilities(dist);
    let counts_a = n * (both + a_only) + detectors.a.dark_rate * duration;
    let counts_b = n * (both + b_only) + detectors.b.dark_rate * duration;
    ExpectedCounts {
        counts_a,
        counts_b,
        true_coincidences: n * both,
        accidentals: accidental_mean(counts_a, counts_b, detectors.window(), duration),
    }
}

fn accidental_mean(counts_a: f64, counts_b: f64, window_ns: f64, duration: f64) -> f64 {
    if duration <= 0.0 {
        return 0.0;
    }
    counts_a * counts_b * 2.0 * window_ns * 1e-9 / duration
}

fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).map(|d| d.sample(rng)).unwrap_or(0)
}

/// Draws one count record. `delta` is copied into the record.
pub fn sample_record<R: Rng + ?Sized>(
    dist: &OutcomeDistribution,
    delta: f64,
    pair_rate: f64,
    duration: f64,
    detectors: &DetectorPair,
    rng: &mut R,
) -> Result<CountRecord, DetectionError> {
    dist.validate()?;
    detectors.validate()?;
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(DetectionError::InvalidAcquisition(format!(
            "duration must be finite and >= 0, got {duration}"
        )));
    }
    if !(pair_rate >= 0.0 && pair_rate.is_finite()) {
        return Err(DetectionError::InvalidAcquisition(format!(
            "pair rate must be finite and >= 0, got {pair_rate}"
        )));
    }
    let events = poisson(rng, pair_rate * duration);
    let [both, a_only, b_only] = detectors.event_probabilities(dist);

    // multinomial split of the events by sequential binomials
    let mut left = events;
    let mut mass = 1.0;
    let draw = |p: f64, left: &mut u64, mass: &mut f64, rng: &mut R| {
        let k = if *mass > 0.0 {
            binomial(rng, *left, (p / *mass).clamp(0.0, 1.0))
        } else {
            0
        };
        *left -= k;
        *mass -= p;
        k
    };
    let n_both = draw(both, &mut left, &mut mass, rng);
    let n_a = draw(a_only, &mut left, &mut mass, rng);
    let n_b = draw(b_only, &mut left, &mut mass, rng);

    let counts_a = n_both + n_a + poisson(rng, detectors.a.dark_rate * duration);
    let counts_b = n_both + n_b + poisson(rng, detectors.b.dark_rate * duration);
    let accidentals = poisson(
        rng,
        accidental_mean(counts_a as f64, counts_b as f64, detectors.window(), duration),
    );
    let coincidences = (n_both + accidentals).min(counts_a.min(counts_b));
    Ok(CountRecord {
        delta,
        counts_a,
        counts_b,
        coincidences,
        duration,
    })
}

/// Random stream for scan point `index` under master `seed`.
pub fn point_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub seed: u64,
    pub config_digest: Option<String>,
    /// nm
    pub wavelength: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceTrace {
    pub records: Vec<CountRecord>,
    pub metadata: TraceMetadata,
}

impl CoincidenceTrace {
    pub fn new(records: Vec<CountRecord>, metadata: TraceMetadata) -> Result<Self, DetectionError> {
        for w in records.windows(2) {
            if !(w[1].delta > w[0].delta) {
                return Err(DetectionError::InvalidAcquisition(
                    "trace deltas must be strictly increasing".to_string(),
                ));
            }
        }
        for r in &records {
            if r.coincidences > r.counts_a.min(r.counts_b) {
                return Err(DetectionError::InvalidAcquisition(format!(
                    "coincidences exceed singles at delta {}",
                    r.delta
                )));
            }
        }
        Ok(Self { records, metadata })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.delta).collect()
    }

    pub fn coincidences(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.coincidences as f64).collect()
    }

    pub fn counts_a(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.counts_a as f64).collect()
    }

    pub fn counts_b(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.counts_b as f64).collect()
    }
}

/// Samples every scan point of precomputed exact distributions.
pub fn sample_trace(
    points: &[ScanPoint],
    pair_rate: f64,
    detectors: &DetectorPair,
    duration: f64,
    metadata: TraceMetadata,
) -> Result<CoincidenceTrace, DetectionError> {
    let seed = metadata.seed;
    let records = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = point_rng(seed, i);
            sample_record(&p.distribution, p.delta, pair_rate, duration, detectors, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    CoincidenceTrace::new(records, metadata)
}

/// Exact scan followed by sampling at every point.
pub fn generate_trace(
    spec: &InterferometerSpec,
    source: &SourceModel,
    detectors: &DetectorPair,
    duration: f64,
    seed: u64,
) -> Result<CoincidenceTrace, DetectionError> {
    let points = run_scan_exact(spec, source)?;
    sample_trace(
        &points,
        source.pair_rate,
        detectors,
        duration,
        TraceMetadata {
            seed,
            config_digest: None,
            wavelength: Some(spec.wavelength),
        },
    )
}
