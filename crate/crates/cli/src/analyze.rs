use std::fs::File;
use std::path::{Path, PathBuf};

use noon_core::analysis::{analyze as run_pipeline, AnalysisOptions, FitResult, Series, DEFAULT_BAND};
use noon_core::io::{read_trace, trace_metadata, write_series, write_spectrum};
use serde_json::{json, Value};

use crate::{create, output_dir, runtime, CliError};

/// Wavelength assumed when the trace carries none.
pub const FALLBACK_WAVELENGTH_NM: f64 = 806.0;

#[derive(Debug, Clone, Default)]
pub struct AnalyzeArgs {
    /// Band edges in units of 1/λ.
    pub band_lo: Option<f64>,
    pub band_hi: Option<f64>,
    pub no_filter: bool,
    pub wavelength_nm: Option<f64>,
}

pub struct AnalyzeOutputs {
    pub spectrum: PathBuf,
    pub filtered: PathBuf,
    pub report: PathBuf,
    pub fit: Option<FitResult>,
}

fn fit_json(f: &FitResult) -> Value {
    json!({
        "period_nm": f.period,
        "period_uncertainty_nm": f.period_uncertainty,
        "amplitude": f.amplitude,
        "amplitude_uncertainty": f.amplitude_uncertainty,
        "phase_rad": f.phase,
        "phase_uncertainty_rad": f.phase_uncertainty,
        "offset": f.offset,
        "offset_uncertainty": f.offset_uncertainty,
        "visibility": f.visibility,
        "visibility_flagged": f.visibility_flagged,
        "residual_rms": f.residual_rms,
        "iterations": f.iterations,
    })
}

/// Spectrum, band-stop and fit of a trace file. Outputs go next to the
/// trace unless the output directory is overridden.
pub fn analyze(trace_path: &Path, args: &AnalyzeArgs) -> Result<AnalyzeOutputs, CliError> {
    let file = File::open(trace_path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", trace_path.display())))?;
    let trace = read_trace(file)
        .map_err(|e| CliError::Validation(format!("{}: {e}", trace_path.display())))?;
    let wavelength = args
        .wavelength_nm
        .or(trace.metadata.wavelength)
        .unwrap_or(FALLBACK_WAVELENGTH_NM);
    let band = (
        args.band_lo.unwrap_or(DEFAULT_BAND.0),
        args.band_hi.unwrap_or(DEFAULT_BAND.1),
    );
    if !args.no_filter && !(band.0 >= 0.0 && band.1 > band.0) {
        return Err(CliError::Validation(format!(
            "band edges must satisfy 0 <= band-lo < band-hi, got [{}, {})",
            band.0, band.1
        )));
    }
    let options = AnalysisOptions {
        band_per_lambda: (!args.no_filter).then_some(band),
        ..AnalysisOptions::default()
    };
    let series = Series::coincidences(&trace);
    let result = run_pipeline(&series, wavelength, &options)
        .map_err(|e| CliError::Validation(format!("{}: {e}", trace_path.display())))?;

    let default_dir = trace_path.parent().unwrap_or(Path::new("."));
    let dir = output_dir(if default_dir.as_os_str().is_empty() {
        Path::new(".")
    } else {
        default_dir
    })?;
    let stem = trace_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".to_string());
    let meta = trace_metadata(&trace.metadata);

    let spectrum_path = dir.join(format!("{stem}_spectrum.csv"));
    write_spectrum(create(&spectrum_path)?, &meta, &result.spectrum, wavelength).map_err(runtime)?;
    let filtered_path = dir.join(format!("{stem}_filtered.csv"));
    write_series(create(&filtered_path)?, &meta, "coincidences_filtered", &result.filtered)
        .map_err(runtime)?;

    let (status, fit, error) = match &result.fit {
        Ok(f) => ("ok", fit_json(f), Value::Null),
        Err(e) => ("error", Value::Null, json!(e.to_string())),
    };
    let components = match &result.components {
        Ok((one, two)) => json!({ "lambda": fit_json(one), "half_lambda": fit_json(two) }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let report = json!({
        "status": status,
        "error": error,
        "trace": trace_path.display().to_string(),
        "seed": trace.metadata.seed,
        "config_digest": trace.metadata.config_digest,
        "wavelength_nm": wavelength,
        "band_per_lambda": options.band_per_lambda.map(|(a, b)| vec![a, b]),
        "fit": fit,
        "components": components,
    });
    let report_path = dir.join(format!("{stem}_fit.json"));
    let mut w = create(&report_path)?;
    serde_json::to_writer_pretty(&mut w, &report).map_err(runtime)?;
    std::io::Write::write_all(&mut w, b"\n").map_err(runtime)?;

    Ok(AnalyzeOutputs {
        spectrum: spectrum_path,
        filtered: filtered_path,
        report: report_path,
        fit: result.fit.ok(),
    })
}
