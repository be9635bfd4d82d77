use std::f64::consts::PI;

use noon_core::analysis::{analyze, Series};
use noon_core::config::{OverlapConfig, RunConfig};
use noon_core::detection::generate_trace;
use noon_core::elements::{
    apply_beamsplitter, apply_phase, apply_propagation, BeamsplitterSpec, Dilation, PhaseRelation,
    PropagationSpec,
};
use noon_core::experiment::{
    coincidence_probability_analytic, decay_length, hom_stage, outcome_at_phase, run_scan_exact,
    InterferometerSpec, SourceModel,
};
use noon_core::fock::{OccupationVector, StateVector, DEFAULT_N_MAX};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct SelftestOptions {
    /// Replace one dilation by a non-unitary matrix (negative control).
    pub corrupt_dilation: bool,
}

fn random_passive(rng: &mut impl Rng) -> BeamsplitterSpec {
    let t = Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..2.0 * PI));
    let r = Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..2.0 * PI));
    let s = BeamsplitterSpec::new(t, r);
    let (a, b) = s.singular_values();
    let top = a.max(b);
    if top > 1.0 {
        BeamsplitterSpec::new(t / top, r / top)
    } else {
        s
    }
}

fn ideal_spec(spbs: BeamsplitterSpec) -> InterferometerSpec {
    InterferometerSpec {
        spbs,
        arm_propagation: [PropagationSpec::none(); 2],
        ..RunConfig::paper_default().interferometer()
    }
}

fn eq6_oracle(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    let mut error = None;
    for _ in 0..200 {
        let s = random_passive(rng);
        match run_scan_exact(&ideal_spec(s), &SourceModel::ideal(1.0)) {
            Ok(points) => {
                for p in &points {
                    let q = coincidence_probability_analytic(s.t, s.r, p.phase).unwrap_or(f64::NAN);
                    worst = worst.max((p.coincidence() - q).abs());
                }
            }
            Err(e) => error = Some(e.to_string()),
        }
    }
    Check {
        name: "eq6-oracle",
        passed: error.is_none() && worst < 1e-10,
        detail: error.unwrap_or_else(|| format!("max deviation {worst:.2e} over 200 random splitters")),
    }
}

fn dilation_unitarity(rng: &mut ChaCha8Rng, corrupt: bool) -> Check {
    let mut dilations: Vec<Dilation> = (0..1000)
        .filter_map(|_| random_passive(rng).dilate().ok())
        .collect();
    for rel in PhaseRelation::ALL {
        if let Ok(d) = BeamsplitterSpec::half_absorbing(rel).dilate() {
            dilations.push(d);
        }
    }
    if corrupt {
        let mut m = *dilations[0].matrix();
        m[(0, 0)] *= Complex64::new(1.05, 0.0);
        dilations[0] = Dilation::from_matrix_unchecked(m);
    }
    let worst = dilations
        .iter()
        .map(|d| d.unitarity_defect())
        .fold(0.0, f64::max);
    Check {
        name: "dilation-unitarity",
        passed: dilations.len() == 1004 && worst < 1e-12,
        detail: format!("max defect |U†U - I| = {worst:.2e} over {} dilations", dilations.len()),
    }
}

fn photon_conservation(rng: &mut ChaCha8Rng) -> Check {
    let mut drift = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=3u32);
        let k = rng.random_range(0..=n);
        let Ok(s) = StateVector::fock([k, n - k], DEFAULT_N_MAX) else {
            continue;
        };
        let out = match rng.random_range(0..3) {
            0 => apply_beamsplitter(&s, 0, 1, &random_passive(rng)),
            1 => apply_phase(&s, 1, rng.random_range(0.0..2.0 * PI)),
            _ => PropagationSpec::new(0.01, rng.random_range(0.0..0.01), rng.random_range(0.0..200.0))
                .and_then(|p| apply_propagation(&s, 0, &p)),
        };
        drift = match out {
            Ok(o) => drift.max((o.total_number_expectation() - n as f64).abs()),
            Err(_) => f64::INFINITY,
        };
    }
    Check {
        name: "photon-conservation",
        passed: drift < 1e-12,
        detail: format!("max drift of total photon number {drift:.2e} over 1000 applications"),
    }
}

fn n_scaling() -> Check {
    let k_imag = 0.004;
    let d = 75.0;
    let mut worst = 0.0f64;
    let mut exact = true;
    for n in 1..=4u32 {
        let survival = PropagationSpec::new(0.0, k_imag, d)
            .ok()
            .and_then(|p| {
                let s = StateVector::fock([n], DEFAULT_N_MAX).ok()?;
                apply_propagation(&s, 0, &p).ok()
            })
            .and_then(|o| o.signal_marginal().get(&OccupationVector::from([n])).copied())
            .unwrap_or(f64::NAN);
        worst = worst.max((survival - (-2.0 * n as f64 * k_imag * d).exp()).abs());
        exact &= match (decay_length(n, k_imag), decay_length(1, k_imag)) {
            (Ok(a), Ok(b)) => a == b / n as f64,
            _ => false,
        };
    }
    Check {
        name: "n-scaling",
        passed: worst < 1e-12 && exact,
        detail: format!("survival deviation {worst:.2e}; decay length scales as 1/N: {exact}"),
    }
}

fn nonlinear_absorption() -> Check {
    let spec = ideal_spec(BeamsplitterSpec::half_absorbing(PhaseRelation::Plus));
    let src = SourceModel::ideal(1.0);
    let weight = |phi: f64, n: u32| {
        outcome_at_phase(&spec, &src, phi)
            .map(|d| d.signal_number_distribution().get(&n).copied().unwrap_or(0.0))
            .unwrap_or(f64::NAN)
    };
    let two = weight(PI / 2.0, 2);
    let one = weight(0.0, 1);
    let one_left = weight(PI / 2.0, 1);
    Check {
        name: "nonlinear-absorption",
        passed: two < 1e-12 && one < 1e-12 && (one_left - 1.0).abs() < 1e-12,
        detail: format!("P(2 | e^2iphi=-1) = {two:.1e}, P(1 | e^2iphi=+1) = {one:.1e}"),
    }
}

fn hom_coalescence() -> Check {
    let bs = BeamsplitterSpec::balanced_lossless();
    let coinc = |eta: f64| {
        hom_stage(
            &SourceModel {
                overlap: eta,
                ..SourceModel::ideal(1.0)
            },
            &bs,
        )
        .map(|m| m.unbunched_weight())
        .unwrap_or(f64::NAN)
    };
    let (c1, c0) = (coinc(1.0), coinc(0.0));
    Check {
        name: "hom-coalescence",
        passed: c1 < 1e-12 && (c0 - 0.5).abs() < 1e-12,
        detail: format!("P(coinc | eta=1) = {c1:.1e}, P(coinc | eta=0) = {c0:.12}"),
    }
}

fn pipeline_closure() -> Check {
    let mut cfg = RunConfig::paper_default();
    cfg.source.bunching_fidelity = 1.0;
    cfg.source.overlap = OverlapConfig::Direct(1.0);
    let spec = cfg.interferometer();
    let period = generate_trace(&spec, &cfg.source_model(), &cfg.detector_pair(), cfg.duration_s, cfg.seed)
        .map_err(|e| e.to_string())
        .and_then(|t| {
            analyze(&Series::coincidences(&t), spec.wavelength, &cfg.analysis.options())
                .map_err(|e| e.to_string())
        })
        .and_then(|a| a.fit.map_err(|e| e.to_string()))
        .map(|f| f.period);
    match period {
        Ok(p) => Check {
            name: "pipeline-closure",
            passed: (p - spec.wavelength / 2.0).abs() <= 10.0,
            detail: format!("fitted period {p:.1} nm, expected {:.1} nm", spec.wavelength / 2.0),
        },
        Err(e) => Check {
            name: "pipeline-closure",
            passed: false,
            detail: e,
        },
    }
}

pub fn selftest(options: &SelftestOptions) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    vec![
        eq6_oracle(&mut rng),
        dilation_unitarity(&mut rng, options.corrupt_dilation),
        photon_conservation(&mut rng),
        n_scaling(),
        nonlinear_absorption(),
        hom_coalescence(),
        pipeline_closure(),
    ]
}
