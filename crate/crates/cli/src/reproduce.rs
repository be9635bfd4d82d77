use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use noon_core::analysis::{
    band_in_wavenumbers, band_stop, fft_spectrum, fit_sinusoid, fit_two_sinusoids, FitResult,
    Series, Window, DEFAULT_BAND,
};
use noon_core::config::RunConfig;
use noon_core::detection::{expected_counts, sample_trace, CoincidenceTrace, TraceMetadata};
use noon_core::experiment::{run_scan_exact, ScanPoint};
use noon_core::io::{trace_metadata, write_columns, write_spectrum, Metadata};

use crate::{create, output_dir, runtime, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

pub struct ReproduceOutputs {
    pub files: Vec<PathBuf>,
    /// Human-readable findings, one per line.
    pub summary: Vec<String>,
}

struct Data {
    cfg: RunConfig,
    points: Vec<ScanPoint>,
    trace: CoincidenceTrace,
    meta: Metadata,
}

fn simulate(seed: Option<u64>) -> Result<Data, CliError> {
    let mut cfg = RunConfig::paper_default();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let points = run_scan_exact(&cfg.interferometer(), &cfg.source_model()).map_err(runtime)?;
    let tm = TraceMetadata {
        seed: cfg.seed,
        config_digest: Some(cfg.digest()),
        wavelength: Some(cfg.wavelength_nm),
    };
    let trace = sample_trace(
        &points,
        cfg.source.pair_rate_hz,
        &cfg.detector_pair(),
        cfg.duration_s,
        tm.clone(),
    )
    .map_err(runtime)?;
    Ok(Data {
        meta: trace_metadata(&tm),
        cfg,
        points,
        trace,
    })
}

fn eval(f: &FitResult, delta: f64) -> f64 {
    f.amplitude * (2.0 * PI * delta / f.period + f.phase).cos()
}

/// Writes plot-ready data for one figure of the default experiment.
pub fn reproduce(figure: Figure, seed: Option<u64>) -> Result<ReproduceOutputs, CliError> {
    let data = simulate(seed)?;
    let dir = output_dir(Path::new("out"))?;
    let lambda = data.cfg.wavelength_nm;
    let series = Series::coincidences(&data.trace);
    let mut files = Vec::new();
    let mut summary = Vec::new();

    match figure {
        Figure::Fig2 => {
            let (one, two) = fit_two_sinusoids(&series, lambda).map_err(runtime)?;
            let rows = series.delta.iter().zip(&series.values).map(|(d, y)| {
                let model = one.offset + eval(&one, *d) + eval(&two, *d);
                vec![d.to_string(), y.to_string(), model.to_string()]
            });
            let path = dir.join("fig2.csv");
            write_columns(
                create(&path)?,
                &data.meta,
                &["delta_nm", "coincidences", "two_sinusoid_fit"],
                rows,
            )
            .map_err(runtime)?;
            files.push(path);
            summary.push(format!(
                "lambda component amplitude {:.1}, lambda/2 component amplitude {:.1}, offset {:.1}",
                one.amplitude, two.amplitude, one.offset
            ));
        }
        Figure::Fig3 => {
            let spec = fft_spectrum(&series, Window::None).map_err(runtime)?;
            let path = dir.join("fig3_spectrum.csv");
            write_spectrum(create(&path)?, &data.meta, &spec, lambda).map_err(runtime)?;
            files.push(path);
            let mut peaks = spec.peaks(0.2);
            peaks.sort_by(|a, b| a.wavenumber.total_cmp(&b.wavenumber));
            let labeled: Vec<(&str, f64, f64)> = peaks
                .iter()
                .map(|p| {
                    let k = p.wavenumber * lambda;
                    let label = if (k - 1.0).abs() < 0.25 {
                        "single_plasmon"
                    } else if (k - 2.0).abs() < 0.25 {
                        "noon"
                    } else {
                        "other"
                    };
                    (label, k, p.magnitude)
                })
                .collect();
            for (label, k, m) in &labeled {
                summary.push(format!("peak {label} at {k:.3}/lambda, magnitude {m:.1}"));
            }
            let rows = labeled
                .iter()
                .map(|(label, k, m)| vec![label.to_string(), k.to_string(), m.to_string()]);
            let path = dir.join("fig3_peaks.csv");
            write_columns(
                create(&path)?,
                &data.meta,
                &["label", "wavenumber_per_lambda", "magnitude"],
                rows,
            )
            .map_err(runtime)?;
            files.push(path);
        }
        Figure::Fig4 => {
            let (lo, hi) = band_in_wavenumbers(DEFAULT_BAND, lambda);
            let filtered = band_stop(&series, lo, hi).map_err(runtime)?;
            let fit = fit_sinusoid(&filtered, None).map_err(runtime)?;
            let spec = fft_spectrum(&filtered, Window::None).map_err(runtime)?;
            let residual = spec.magnitude_at(1.0 / lambda) / spec.magnitude_at(2.0 / lambda);
            let mut meta = data.meta.clone();
            meta.push(("period_nm".to_string(), fit.period.to_string()));
            meta.push(("period_uncertainty_nm".to_string(), fit.period_uncertainty.to_string()));
            meta.push(("visibility".to_string(), fit.visibility.to_string()));
            meta.push(("residual_single_plasmon_ratio".to_string(), residual.to_string()));
            let rows = filtered.delta.iter().zip(&filtered.values).map(|(d, y)| {
                vec![d.to_string(), y.to_string(), (fit.offset + eval(&fit, *d)).to_string()]
            });
            let path = dir.join("fig4.csv");
            write_columns(
                create(&path)?,
                &meta,
                &["delta_nm", "filtered_coincidences", "half_lambda_fit"],
                rows,
            )
            .map_err(runtime)?;
            files.push(path);
            summary.push(format!(
                "period {:.1} +/- {:.1} nm, visibility {:.3}, residual 1/lambda content {:.2e} of the 2/lambda peak",
                fit.period, fit.period_uncertainty, fit.visibility, residual
            ));
        }
        Figure::Fig5 => {
            let det = data.cfg.detector_pair();
            let expected: Vec<(f64, f64)> = data
                .points
                .iter()
                .map(|p| {
                    let e = expected_counts(&p.distribution, data.cfg.source.pair_rate_hz, data.cfg.duration_s, &det);
                    (e.counts_a, e.counts_b)
                })
                .collect();
            let argmax = |f: &dyn Fn(&(f64, f64)) -> f64| {
                (0..expected.len())
                    .max_by(|a, b| f(&expected[*a]).total_cmp(&f(&expected[*b])))
                    .unwrap_or(0)
            };
            let (ia, ib) = (argmax(&|x| x.0), argmax(&|x| x.1));
            let a = Series::new(series.delta.clone(), data.trace.counts_a()).map_err(runtime)?;
            let b = Series::new(series.delta.clone(), data.trace.counts_b()).map_err(runtime)?;
            let (fa, _) = fit_two_sinusoids(&a, lambda).map_err(runtime)?;
            let (fb, _) = fit_two_sinusoids(&b, lambda).map_err(runtime)?;
            let shift = (fa.phase - fb.phase + PI).rem_euclid(2.0 * PI) - PI;
            let mut meta = data.meta.clone();
            meta.push(("expected_argmax_a_nm".to_string(), data.points[ia].delta.to_string()));
            meta.push(("expected_argmax_b_nm".to_string(), data.points[ib].delta.to_string()));
            meta.push(("sampled_phase_shift_rad".to_string(), shift.to_string()));
            let rows = data.trace.records.iter().zip(&expected).map(|(r, e)| {
                vec![
                    r.delta.to_string(),
                    r.counts_a.to_string(),
                    r.counts_b.to_string(),
                    e.0.to_string(),
                    e.1.to_string(),
                ]
            });
            let path = dir.join("fig5.csv");
            write_columns(
                create(&path)?,
                &meta,
                &["delta_nm", "counts_a", "counts_b", "expected_a", "expected_b"],
                rows,
            )
            .map_err(runtime)?;
            files.push(path);
            summary.push(format!(
                "expected singles peak at {} nm (A) and {} nm (B); sampled lambda-component phase shift {:.3} rad",
                data.points[ia].delta, data.points[ib].delta, shift
            ));
        }
    }
    Ok(ReproduceOutputs { files, summary })
}
