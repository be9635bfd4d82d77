//! Declarative run configuration (JSON, units in key names).

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{AnalysisOptions, Window, DEFAULT_BAND};
use crate::detection::{DetectorPair, DetectorSpec};
use crate::elements::{BeamsplitterSpec, Classification, PhaseRelation, PropagationSpec};
use crate::experiment::{gaussian_overlap, uniform_scan, InterferometerSpec, SourceModel};

/// Bunching fidelity that puts the exact default trace at 20% visibility.
pub const DEFAULT_BUNCHING_FIDELITY: f64 = 0.21;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.path.is_empty()) {
            (Some(l), false) => write!(f, "line {l}: {}: {}", self.path, self.message),
            (Some(l), true) => write!(f, "line {l}: {}", self.message),
            (None, false) => write!(f, "{}: {}", self.path, self.message),
            (None, true) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub start_nm: f64,
    pub stop_nm: f64,
    pub step_nm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OverlapConfig {
    Direct(f64),
    GaussianDelay {
        delay_nm: f64,
        coherence_length_nm: f64,
    },
}

impl OverlapConfig {
    pub fn overlap(&self) -> f64 {
        match *self {
            Self::Direct(eta) => eta,
            Self::GaussianDelay {
                delay_nm,
                coherence_length_nm,
            } => gaussian_overlap(delay_nm, coherence_length_nm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub pair_rate_hz: f64,
    pub overlap: OverlapConfig,
    pub bunching_fidelity: f64,
    pub unbunched_port_bias: f64,
}

/// Splitter given by its power coefficients and the phase relation r/t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitterConfig {
    pub transmittance: f64,
    pub reflectance: f64,
    pub relation: PhaseRelation,
}

impl SplitterConfig {
    pub fn spec(&self) -> BeamsplitterSpec {
        BeamsplitterSpec::with_relation(self.transmittance, self.reflectance, self.relation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub k_real_per_nm: f64,
    pub k_imag_per_nm: f64,
    pub distance_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    pub window_ns: f64,
}

impl DetectorConfig {
    pub fn spec(&self) -> DetectorSpec {
        DetectorSpec {
            efficiency: self.efficiency,
            dark_rate: self.dark_rate_hz,
            window: self.window_ns,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorsConfig {
    pub a: DetectorConfig,
    pub b: DetectorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub filter: bool,
    pub band_lo_per_lambda: f64,
    pub band_hi_per_lambda: f64,
    pub window: Window,
}

impl AnalysisConfig {
    pub fn options(&self) -> AnalysisOptions {
        AnalysisOptions {
            band_per_lambda: self
                .filter
                .then_some((self.band_lo_per_lambda, self.band_hi_per_lambda)),
            window: self.window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    pub trace_file: String,
    pub exact_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub wavelength_nm: f64,
    pub scan: ScanConfig,
    pub source: SourceConfig,
    pub hom_splitter: SplitterConfig,
    pub spbs: SplitterConfig,
    pub arms: [ArmConfig; 2],
    pub detectors: DetectorsConfig,
    pub duration_s: f64,
    pub seed: u64,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn paper_default() -> Self {
        let wavelength = 806.0;
        let arm = ArmConfig {
            k_real_per_nm: 2.0 * std::f64::consts::PI / wavelength,
            k_imag_per_nm: 8e-6,
            distance_nm: 10_000.0,
        };
        let detector = DetectorConfig {
            efficiency: 0.6,
            dark_rate_hz: 100.0,
            window_ns: 10.0,
        };
        Self {
            wavelength_nm: wavelength,
            scan: ScanConfig {
                start_nm: 0.0,
                stop_nm: 4030.0,
                step_nm: 25.0,
            },
            source: SourceConfig {
                pair_rate_hz: 1500.0,
                overlap: OverlapConfig::Direct(0.95),
                bunching_fidelity: DEFAULT_BUNCHING_FIDELITY,
                unbunched_port_bias: 0.05,
            },
            hom_splitter: SplitterConfig {
                transmittance: 0.5,
                reflectance: 0.5,
                relation: PhaseRelation::PlusI,
            },
            spbs: SplitterConfig {
                transmittance: 0.25,
                reflectance: 0.25,
                relation: PhaseRelation::Plus,
            },
            arms: [arm.clone(), arm],
            detectors: DetectorsConfig {
                a: detector.clone(),
                b: detector,
            },
            duration_s: 10.0,
            seed: 2018,
            analysis: AnalysisConfig {
                filter: true,
                band_lo_per_lambda: DEFAULT_BAND.0,
                band_hi_per_lambda: DEFAULT_BAND.1,
                window: Window::None,
            },
            output: OutputConfig {
                directory: "out".to_string(),
                trace_file: "trace.csv".to_string(),
                exact_file: "exact.csv".to_string(),
            },
        }
    }

    /// Parses and validates. Errors name the offending key and, where it
    /// can be found, its line in `text`.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError {
            path: String::new(),
            line: Some(e.line()),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|mut e| {
            e.line = locate(text, &e.path);
            e
        })?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Canonical compact serialization.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |path: &str, message: String| {
            Err(ConfigError {
                path: path.to_string(),
                line: None,
                message,
            })
        };
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;

        if !finite_pos(self.wavelength_nm) {
            return err("wavelength_nm", "must be positive".into());
        }
        let s = &self.scan;
        if !s.start_nm.is_finite() || !s.stop_nm.is_finite() || s.stop_nm <= s.start_nm {
            return err("scan.stop_nm", "scan range must have stop_nm > start_nm".into());
        }
        if !finite_pos(s.step_nm) {
            return err("scan.step_nm", "must be positive".into());
        }
        if s.step_nm >= self.wavelength_nm / 4.0 {
            return err(
                "scan.step_nm",
                format!(
                    "step {} nm violates the Nyquist rule: it must be below wavelength_nm/4 = {} nm",
                    s.step_nm,
                    self.wavelength_nm / 4.0
                ),
            );
        }
        if uniform_scan(s.start_nm, s.stop_nm, s.step_nm).len() < 16 {
            return err("scan.step_nm", "scan must contain at least 16 points".into());
        }

        let src = &self.source;
        if !finite_nonneg(src.pair_rate_hz) {
            return err("source.pair_rate_hz", "must be finite and >= 0".into());
        }
        match src.overlap {
            OverlapConfig::Direct(eta) if !(0.0..=1.0).contains(&eta) => {
                return err("source.overlap.direct", "must lie in [0, 1]".into())
            }
            OverlapConfig::GaussianDelay {
                delay_nm,
                coherence_length_nm,
            } => {
                if !delay_nm.is_finite() {
                    return err("source.overlap.gaussian_delay.delay_nm", "must be finite".into());
                }
                if !finite_pos(coherence_length_nm) {
                    return err(
                        "source.overlap.gaussian_delay.coherence_length_nm",
                        "must be positive".into(),
                    );
                }
            }
            _ => {}
        }
        if !(0.0..=1.0).contains(&src.bunching_fidelity) {
            return err("source.bunching_fidelity", "must lie in [0, 1]".into());
        }
        if !(-1.0..=1.0).contains(&src.unbunched_port_bias) {
            return err("source.unbunched_port_bias", "must lie in [-1, 1]".into());
        }

        for (name, sp) in [("hom_splitter", &self.hom_splitter), ("spbs", &self.spbs)] {
            if !finite_nonneg(sp.transmittance) {
                return err(&format!("{name}.transmittance"), "must be finite and >= 0".into());
            }
            if !finite_nonneg(sp.reflectance) {
                return err(&format!("{name}.reflectance"), "must be finite and >= 0".into());
            }
            let spec = sp.spec();
            if spec.classify() == Classification::Invalid {
                let (a, b) = spec.singular_values();
                return err(
                    &format!("{name}.relation"),
                    format!(
                        "splitter is not passive: largest singular value {} exceeds 1",
                        a.max(b)
                    ),
                );
            }
        }

        for (i, arm) in self.arms.iter().enumerate() {
            if !arm.k_real_per_nm.is_finite() {
                return err(&format!("arms[{i}].k_real_per_nm"), "must be finite".into());
            }
            if !finite_nonneg(arm.k_imag_per_nm) {
                return err(&format!("arms[{i}].k_imag_per_nm"), "must be finite and >= 0".into());
            }
            if !finite_nonneg(arm.distance_nm) {
                return err(&format!("arms[{i}].distance_nm"), "must be finite and >= 0".into());
            }
        }

        for (name, d) in [("a", &self.detectors.a), ("b", &self.detectors.b)] {
            if !(0.0..=1.0).contains(&d.efficiency) {
                return err(&format!("detectors.{name}.efficiency"), "must lie in [0, 1]".into());
            }
            if !finite_nonneg(d.dark_rate_hz) {
                return err(&format!("detectors.{name}.dark_rate_hz"), "must be finite and >= 0".into());
            }
            if !finite_pos(d.window_ns) {
                return err(&format!("detectors.{name}.window_ns"), "must be positive".into());
            }
        }

        if !finite_pos(self.duration_s) {
            return err("duration_s", "must be positive".into());
        }

        let a = &self.analysis;
        if !(a.band_lo_per_lambda.is_finite() && a.band_lo_per_lambda >= 0.0) {
            return err("analysis.band_lo_per_lambda", "must be finite and >= 0".into());
        }
        if !(a.band_hi_per_lambda.is_finite() && a.band_hi_per_lambda > a.band_lo_per_lambda) {
            return err(
                "analysis.band_hi_per_lambda",
                "must exceed band_lo_per_lambda".into(),
            );
        }

        for (key, v) in [
            ("output.directory", &self.output.directory),
            ("output.trace_file", &self.output.trace_file),
            ("output.exact_file", &self.output.exact_file),
        ] {
            if v.trim().is_empty() {
                return err(key, "must not be empty".into());
            }
        }
        Ok(())
    }

    pub fn interferometer(&self) -> InterferometerSpec {
        let prop = |a: &ArmConfig| PropagationSpec {
            k_real: a.k_real_per_nm,
            k_imag: a.k_imag_per_nm,
            distance: a.distance_nm,
        };
        InterferometerSpec {
            wavelength: self.wavelength_nm,
            hom_splitter: self.hom_splitter.spec(),
            spbs: self.spbs.spec(),
            arm_propagation: [prop(&self.arms[0]), prop(&self.arms[1])],
            scan: uniform_scan(self.scan.start_nm, self.scan.stop_nm, self.scan.step_nm),
        }
    }

    pub fn source_model(&self) -> SourceModel {
        SourceModel {
            pair_rate: self.source.pair_rate_hz,
            overlap: self.source.overlap.overlap(),
            bunching_fidelity: self.source.bunching_fidelity,
            unbunched_port_bias: self.source.unbunched_port_bias,
        }
    }

    pub fn detector_pair(&self) -> DetectorPair {
        DetectorPair {
            a: self.detectors.a.spec(),
            b: self.detectors.b.spec(),
        }
    }
}

/// Line of the last key of a dotted `path` such as `arms[1].distance_nm`.
fn locate(text: &str, path: &str) -> Option<usize> {
    let segments: Vec<&str> = path
        .split('.')
        .map(|s| s.split('[').next().unwrap_or(s))
        .filter(|s| !s.is_empty())
        .collect();
    let mut from = 0;
    let mut line = None;
    for seg in segments {
        let needle = format!("\"{seg}\"");
        let idx = text[from..].find(&needle)? + from;
        line = Some(text[..idx].matches('\n').count() + 1);
        from = idx + needle.len();
    }
    // indexed arrays: skip to the requested element's occurrence
    if let Some(i) = path
        .split('[')
        .nth(1)
        .and_then(|s| s.split(']').next())
        .and_then(|s| s.parse::<usize>().ok())
    {
        let last = path.rsplit('.').next()?;
        let needle = format!("\"{last}\"");
        let arr_key = path.split('[').next()?.rsplit('.').next()?;
        let start = text.find(&format!("\"{arr_key}\""))?;
        let idx = text[start..].match_indices(&needle).nth(i)?.0 + start;
        line = Some(text[..idx].matches('\n').count() + 1);
    }
    line
}
