use std::path::{Path, PathBuf};

use noon_core::config::RunConfig;
use noon_core::detection::{sample_trace, TraceMetadata};
use noon_core::experiment::run_scan_exact;
use noon_core::io::{trace_metadata, write_exact, write_trace};

use crate::{create, output_dir, runtime, CliError};

pub struct RunOutputs {
    pub trace: PathBuf,
    pub exact: PathBuf,
    pub digest: String,
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_json(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Simulates the configured scan and writes the sampled trace and the exact
/// per-point probabilities.
pub fn run(config_path: &Path) -> Result<RunOutputs, CliError> {
    let cfg = load_config(config_path)?;
    run_config(&cfg)
}

pub fn run_config(cfg: &RunConfig) -> Result<RunOutputs, CliError> {
    let spec = cfg.interferometer();
    let points = run_scan_exact(&spec, &cfg.source_model()).map_err(runtime)?;
    let digest = cfg.digest();
    let meta = TraceMetadata {
        seed: cfg.seed,
        config_digest: Some(digest.clone()),
        wavelength: Some(cfg.wavelength_nm),
    };
    let trace = sample_trace(
        &points,
        cfg.source.pair_rate_hz,
        &cfg.detector_pair(),
        cfg.duration_s,
        meta.clone(),
    )
    .map_err(runtime)?;

    let dir = output_dir(Path::new(&cfg.output.directory))?;
    let trace_path = dir.join(&cfg.output.trace_file);
    let exact_path = dir.join(&cfg.output.exact_file);
    write_trace(create(&trace_path)?, &trace).map_err(runtime)?;
    write_exact(create(&exact_path)?, &trace_metadata(&meta), &points).map_err(runtime)?;
    Ok(RunOutputs {
        trace: trace_path,
        exact: exact_path,
        digest,
    })
}
