use std::f64::consts::PI;

use noon_core::detection::{
    expected_counts, point_rng, sample_record, sample_trace, DetectorPair, DetectorSpec,
    TraceMetadata,
};
use noon_core::elements::{BeamsplitterSpec, PropagationSpec};
use noon_core::experiment::{
    outcome_at_phase, run_scan_exact, uniform_scan, InterferometerSpec, OutcomeDistribution,
    SourceModel,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(spbs: BeamsplitterSpec, scan: Vec<f64>) -> InterferometerSpec {
    InterferometerSpec {
        wavelength: 806.0,
        hom_splitter: BeamsplitterSpec::balanced_lossless(),
        spbs,
        arm_propagation: [PropagationSpec::new(0.0078, 2e-5, 5000.0).unwrap(); 2],
        scan,
    }
}

fn random_case(rng: &mut ChaCha8Rng) -> OutcomeDistribution {
    let t = Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..2.0 * PI));
    let r = Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..2.0 * PI));
    let s = BeamsplitterSpec::new(t, r);
    let (a, b) = s.singular_values();
    let s = if a.max(b) > 1.0 {
        BeamsplitterSpec::new(t / a.max(b), r / a.max(b))
    } else {
        s
    };
    let src = SourceModel {
        pair_rate: 1.0,
        overlap: rng.random_range(0.0..=1.0),
        bunching_fidelity: rng.random_range(0.0..=1.0),
        unbunched_port_bias: rng.random_range(-1.0..=1.0),
    };
    outcome_at_phase(&spec(s, vec![0.0]), &src, rng.random_range(0.0..2.0 * PI)).unwrap()
}

#[test]
fn sampled_coincidences_are_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let det = DetectorPair::matched(DetectorSpec {
        efficiency: 1.0,
        dark_rate: 0.0,
        window: 1e-6,
    });
    let events = 2e5;
    for case in 0..100 {
        let dist = random_case(&mut rng);
        let p = dist.coincidence();
        let mut r = point_rng(case, 0);
        let rec = sample_record(&dist, 0.0, events, 1.0, &det, &mut r).unwrap();
        let mean = events * p;
        let sigma = mean.sqrt().max(1.0);
        assert!(
            (rec.coincidences as f64 - mean).abs() <= 4.0 * sigma,
            "case {case}: {} vs {mean}",
            rec.coincidences
        );
    }
}

#[test]
fn parallel_sampling_matches_sequential() {
    let sp = spec(BeamsplitterSpec::half_absorbing(noon_core::PhaseRelation::Plus), uniform_scan(0.0, 2000.0, 25.0));
    let src = SourceModel {
        pair_rate: 1500.0,
        overlap: 0.9,
        bunching_fidelity: 0.3,
        unbunched_port_bias: 0.05,
    };
    let det = DetectorPair::matched(DetectorSpec::default());
    let pts = run_scan_exact(&sp, &src).unwrap();
    let meta = TraceMetadata {
        seed: 8,
        config_digest: None,
        wavelength: Some(806.0),
    };
    let par = sample_trace(&pts, src.pair_rate, &det, 10.0, meta).unwrap();
    for (i, p) in pts.iter().enumerate() {
        let mut r = point_rng(8, i);
        let rec = sample_record(&p.distribution, p.delta, src.pair_rate, 10.0, &det, &mut r).unwrap();
        assert_eq!(rec, par.records[i]);
    }
    // reversed evaluation order gives the same records
    for i in (0..pts.len()).rev() {
        let mut r = point_rng(8, i);
        let rec = sample_record(&pts[i].distribution, pts[i].delta, src.pair_rate, 10.0, &det, &mut r).unwrap();
        assert_eq!(rec, par.records[i]);
    }
}

/// Least-squares slope of y against x.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn coincidences_scale_with_duration_and_efficiency() {
    let sp = spec(BeamsplitterSpec::balanced_lossless(), vec![0.0]);
    let src = SourceModel {
        pair_rate: 1e5,
        overlap: 0.8,
        bunching_fidelity: 0.5,
        unbunched_port_bias: 0.0,
    };
    let dist = outcome_at_phase(&sp, &src, 0.4).unwrap();

    let durations = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let det = DetectorPair::matched(DetectorSpec {
        efficiency: 0.6,
        dark_rate: 0.0,
        window: 1e-6,
    });
    let counts: Vec<f64> = durations
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mut r = point_rng(3, i);
            sample_record(&dist, 0.0, src.pair_rate, *d, &det, &mut r).unwrap().coincidences as f64
        })
        .collect();
    let lx: Vec<f64> = durations.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = counts.iter().map(|c| c.ln()).collect();
    let k = slope(&lx, &ly);
    assert!((k - 1.0).abs() < 0.01, "duration exponent {k}");

    let effs = [0.2, 0.3, 0.4, 0.5, 0.7, 0.9];
    let counts: Vec<f64> = effs
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let det = DetectorPair::matched(DetectorSpec {
                efficiency: *e,
                dark_rate: 0.0,
                window: 1e-6,
            });
            let mut r = point_rng(4, i);
            sample_record(&dist, 0.0, src.pair_rate, 20.0, &det, &mut r).unwrap().coincidences as f64
        })
        .collect();
    let lx: Vec<f64> = effs.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = counts.iter().map(|c| c.ln()).collect();
    let k = slope(&lx, &ly);
    assert!((k - 2.0).abs() < 0.02, "efficiency exponent {k}");
}

#[test]
fn long_integration_converges_to_expectation() {
    let sp = spec(BeamsplitterSpec::half_absorbing(noon_core::PhaseRelation::Plus), vec![0.0]);
    let src = SourceModel::ideal(1e5);
    let det = DetectorPair::matched(DetectorSpec {
        efficiency: 0.6,
        dark_rate: 0.0,
        window: 1e-6,
    });
    let dist = outcome_at_phase(&sp, &src, 0.3).unwrap();
    let mut r = point_rng(21, 0);
    let rec = sample_record(&dist, 0.0, src.pair_rate, 10.0, &det, &mut r).unwrap();
    let exp = expected_counts(&dist, src.pair_rate, 10.0, &det);
    let mean = src.pair_rate * 10.0 * 0.36 * dist.get(1, 1);
    assert!((exp.true_coincidences - mean).abs() < 1e-6 * mean);
    assert!((rec.coincidences as f64 - mean).abs() < 3.0 * mean.sqrt());
}

#[test]
fn accidentals_follow_the_window_formula() {
    // only dark counts: every coincidence is accidental
    let dist = OutcomeDistribution::from_map([((0, 0), 1.0)].into_iter().collect());
    let det = DetectorPair::matched(DetectorSpec {
        efficiency: 0.5,
        dark_rate: 2e4,
        window: 100.0,
    });
    let duration = 50.0;
    let exp = expected_counts(&dist, 0.0, duration, &det);
    let expect = 1e6 * 1e6 * 2.0 * 100e-9 / duration;
    assert!((exp.accidentals - expect).abs() < 1e-6 * expect);
    let total: u64 = (0..50)
        .map(|i| {
            let mut r = point_rng(9, i);
            sample_record(&dist, 0.0, 0.0, duration, &det, &mut r).unwrap().coincidences
        })
        .sum();
    let mean = total as f64 / 50.0;
    assert!((mean - expect).abs() < 4.0 * (expect / 50.0).sqrt(), "{mean} vs {expect}");
}
