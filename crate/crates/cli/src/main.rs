use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noon_cli::analyze::{analyze, AnalyzeArgs};
use noon_cli::reproduce::{reproduce, Figure};
use noon_cli::run::run;
use noon_cli::selftest::{selftest, SelftestOptions};
use noon_cli::CliError;

/// NOON-state interferometry through a lossy plasmonic beamsplitter.
///
/// Outputs go to the configured directory; set NOONSIM_OUT_DIR to override.
#[derive(Parser)]
#[command(name = "noonsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scan and write the sampled trace and exact probabilities.
    Run { config: PathBuf },
    /// Spectrum, band-stop filter and sinusoid fit of a trace file.
    Analyze {
        trace: PathBuf,
        /// Lower band-stop edge in units of 1/λ.
        #[arg(long)]
        band_lo: Option<f64>,
        /// Upper band-stop edge in units of 1/λ.
        #[arg(long)]
        band_hi: Option<f64>,
        /// Fit the raw trace without band-stop filtering.
        #[arg(long)]
        no_filter: bool,
        /// Wavelength in nm when the trace does not record one.
        #[arg(long)]
        wavelength_nm: Option<f64>,
    },
    /// Write plot-ready data for one figure of the default experiment.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the invariant checks.
    Selftest {
        #[arg(long, hide = true)]
        corrupt_dilation: bool,
    },
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config } => {
            let out = run(&config)?;
            println!("trace: {}", out.trace.display());
            println!("exact: {}", out.exact.display());
            println!("config digest: {}", out.digest);
        }
        Command::Analyze {
            trace,
            band_lo,
            band_hi,
            no_filter,
            wavelength_nm,
        } => {
            let args = AnalyzeArgs {
                band_lo,
                band_hi,
                no_filter,
                wavelength_nm,
            };
            let out = analyze(&trace, &args)?;
            println!("spectrum: {}", out.spectrum.display());
            println!("filtered: {}", out.filtered.display());
            println!("report: {}", out.report.display());
            match out.fit {
                Some(f) => println!(
                    "period {:.1} +/- {:.1} nm, visibility {:.3}",
                    f.period, f.period_uncertainty, f.visibility
                ),
                None => eprintln!("warning: fit failed; see the report status"),
            }
        }
        Command::Reproduce { figure, seed } => {
            let out = reproduce(figure, seed)?;
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            for line in &out.summary {
                println!("{line}");
            }
        }
        Command::Selftest { corrupt_dilation } => {
            let checks = selftest(&SelftestOptions { corrupt_dilation });
            let mut failed = Vec::new();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                if !c.passed {
                    failed.push(c.name.to_string());
                }
            }
            if !failed.is_empty() {
                return Err(CliError::SelftestFailed(failed));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
