//! Commands behind the `noonsim` binary.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub mod analyze;
pub mod reproduce;
pub mod run;
pub mod selftest;

/// Environment variable that overrides every output directory.
pub const OUT_DIR_ENV: &str = "NOONSIM_OUT_DIR";

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or input file.
    Validation(String),
    /// Failure while computing or writing results.
    Runtime(String),
    /// One or more self-test checks failed.
    SelftestFailed(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Runtime(_) => 2,
            Self::SelftestFailed(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(m) => write!(f, "validation error: {m}"),
            Self::Runtime(m) => write!(f, "error: {m}"),
            Self::SelftestFailed(names) => write!(f, "self-test failed: {}", names.join(", ")),
        }
    }
}

impl std::error::Error for CliError {}

pub(crate) fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// `NOONSIM_OUT_DIR` if set, else `default`; created if missing.
pub fn output_dir(default: &Path) -> Result<PathBuf, CliError> {
    let dir = std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| default.to_path_buf());
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}
