use std::f64::consts::PI;

use noon_core::elements::{BeamsplitterSpec, PhaseRelation, PropagationSpec};
use noon_core::experiment::{
    coincidence_probability_analytic, hom_stage, outcome_at_phase, run_scan_exact,
    singles_probability_analytic, uniform_scan, Arm, InterferometerSpec, SourceModel,
};
use num_complex::Complex64;
use proptest::prelude::*;

const LAMBDA: f64 = 806.0;

/// Random passive splitter: arbitrary complex t, r rescaled into the unit
/// operator-norm ball when needed.
fn passive_splitter() -> impl Strategy<Value = BeamsplitterSpec> {
    (0.0..1.0f64, 0.0..2.0 * PI, 0.0..1.0f64, 0.0..2.0 * PI).prop_map(|(a, alpha, b, beta)| {
        let t = Complex64::from_polar(a, alpha);
        let r = Complex64::from_polar(b, beta);
        let s = BeamsplitterSpec::new(t, r);
        let (x, y) = s.singular_values();
        let top = x.max(y);
        if top > 1.0 {
            BeamsplitterSpec::new(t / top, r / top)
        } else {
            s
        }
    })
}

fn spec(spbs: BeamsplitterSpec, scan: Vec<f64>) -> InterferometerSpec {
    InterferometerSpec {
        wavelength: LAMBDA,
        hom_splitter: BeamsplitterSpec::balanced_lossless(),
        spbs,
        arm_propagation: [PropagationSpec::none(); 2],
        scan,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exact_scan_matches_closed_form(s in passive_splitter(), phi in 0.0..2.0 * PI) {
        let sp = spec(s, vec![0.0]);
        let p = outcome_at_phase(&sp, &SourceModel::ideal(1.0), phi).unwrap().coincidence();
        let q = coincidence_probability_analytic(s.t, s.r, phi).unwrap();
        prop_assert!((p - q).abs() < 1e-10);
    }

    #[test]
    fn period_is_half_wavelength(s in passive_splitter(), offset in 0.0..LAMBDA) {
        let scan = vec![offset, offset + LAMBDA / 8.0];
        let shifted: Vec<f64> = scan.iter().map(|d| d + LAMBDA / 2.0).collect();
        let src = SourceModel::ideal(1.0);
        let a = run_scan_exact(&spec(s, scan), &src).unwrap();
        let b = run_scan_exact(&spec(s, shifted), &src).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.coincidence() - y.coincidence()).abs() < 1e-12);
        }
    }

    #[test]
    fn coincidences_ignore_phase_relation(ta in 0.0..=0.5f64, ra in 0.0..=0.5f64, phi in 0.0..2.0 * PI) {
        // |t| + |r| <= 1 keeps every relation passive
        let (tp, rp) = (ta * ta, ra * ra);
        let src = SourceModel::ideal(1.0);
        let reference = outcome_at_phase(
            &spec(BeamsplitterSpec::with_relation(tp, rp, PhaseRelation::Plus), vec![0.0]),
            &src,
            phi,
        )
        .unwrap()
        .coincidence();
        for rel in PhaseRelation::ALL {
            let s = BeamsplitterSpec::with_relation(tp, rp, rel);
            let p = outcome_at_phase(&spec(s, vec![0.0]), &src, phi).unwrap().coincidence();
            prop_assert!((p - reference).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_weights_sum_to_one(eta in 0.0..=1.0f64, beta in 0.0..=1.0f64, bias in -1.0..=1.0f64, s in passive_splitter()) {
        let src = SourceModel { pair_rate: 1.0, overlap: eta, bunching_fidelity: beta, unbunched_port_bias: bias };
        let mix = hom_stage(&src, &s).unwrap();
        prop_assert!((mix.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_source_distributions_are_normalized(eta in 0.0..=1.0f64, beta in 0.0..=1.0f64, s in passive_splitter(), phi in 0.0..2.0 * PI) {
        // lossy splitters move weight to lower photon numbers but never
        // create or destroy probability
        let src = SourceModel { pair_rate: 1.0, overlap: eta, bunching_fidelity: beta, unbunched_port_bias: 0.3 };
        let d = outcome_at_phase(&spec(s, vec![0.0]), &src, phi).unwrap();
        prop_assert!((d.total() - 1.0).abs() < 1e-12);
        prop_assert!(d.iter().all(|(_, p)| *p >= -1e-15));
    }
}

#[test]
fn singles_peak_together_for_real_ratio() {
    for rel in [PhaseRelation::Plus, PhaseRelation::Minus] {
        let s = BeamsplitterSpec::half_absorbing(rel);
        let phases: Vec<f64> = (0..400).map(|k| k as f64 * 4.0 * PI / 400.0).collect();
        let p: Vec<(f64, f64)> = phases
            .iter()
            .map(|phi| singles_probability_analytic(s.t, s.r, *phi, Arm::First).unwrap())
            .collect();
        let argmax = |f: &dyn Fn(&(f64, f64)) -> f64| {
            (0..p.len())
                .max_by(|a, b| f(&p[*a]).total_cmp(&f(&p[*b])))
                .unwrap()
        };
        assert_eq!(argmax(&|x| x.0), argmax(&|x| x.1));
    }
}

#[test]
fn simulated_singles_peak_together() {
    // singles from the full simulation, mixed source at the default splitter
    let src = SourceModel {
        pair_rate: 1.0,
        overlap: 0.95,
        bunching_fidelity: 0.2,
        unbunched_port_bias: 0.05,
    };
    for rel in [PhaseRelation::Plus, PhaseRelation::Minus] {
        let sp = spec(BeamsplitterSpec::half_absorbing(rel), uniform_scan(0.0, 1600.0, 5.0));
        let pts = run_scan_exact(&sp, &src).unwrap();
        let means: Vec<(f64, f64)> = pts.iter().map(|p| p.distribution.mean_counts()).collect();
        let a = (0..means.len()).max_by(|x, y| means[*x].0.total_cmp(&means[*y].0)).unwrap();
        let b = (0..means.len()).max_by(|x, y| means[*x].1.total_cmp(&means[*y].1)).unwrap();
        assert_eq!(a, b, "{rel:?}");
    }
}

#[test]
fn nonlinear_absorption_weights() {
    let sp = spec(BeamsplitterSpec::half_absorbing(PhaseRelation::Plus), vec![0.0]);
    let src = SourceModel::ideal(1.0);
    let plus = outcome_at_phase(&sp, &src, 0.0).unwrap().signal_number_distribution();
    let minus = outcome_at_phase(&sp, &src, PI / 2.0).unwrap().signal_number_distribution();
    assert!(plus.get(&1).copied().unwrap_or(0.0) < 1e-12);
    assert!(minus.get(&2).copied().unwrap_or(0.0) < 1e-12);
    // two-photon outcomes at e^{2iφ} = 1: |2,0⟩, |1,1⟩, |0,2⟩ with 1/8, 1/4, 1/8
    let d = outcome_at_phase(&sp, &src, 0.0).unwrap();
    assert!((d.get(2, 0) - 0.125).abs() < 1e-12);
    assert!((d.get(1, 1) - 0.25).abs() < 1e-12);
    assert!((d.get(0, 2) - 0.125).abs() < 1e-12);
    assert!((d.get(0, 0) - 0.5).abs() < 1e-12);
}
