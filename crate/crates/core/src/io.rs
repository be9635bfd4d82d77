//! CSV files for traces, exact probabilities, spectra and filtered series.
//!
//! Every file starts with `# key: value` metadata lines.

use std::io::{Read, Write};

use thiserror::Error;

use crate::analysis::{Series, Spectrum};
use crate::detection::{CoincidenceTrace, CountRecord, DetectionError, TraceMetadata};
use crate::experiment::ScanPoint;

pub const TRACE_HEADER: [&str; 5] = ["delta_nm", "counts_a", "counts_b", "coincidences", "duration_s"];
pub const EXACT_HEADER: [&str; 4] = ["delta_nm", "p_coincidence", "mean_n3", "mean_n4"];
pub const SPECTRUM_HEADER: [&str; 2] = ["wavenumber_per_lambda", "magnitude"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error(transparent)]
    Trace(#[from] DetectionError),
}

/// Metadata lines as ordered key/value pairs.
pub type Metadata = Vec<(String, String)>;

pub fn trace_metadata(meta: &TraceMetadata) -> Metadata {
    let mut out = vec![("seed".to_string(), meta.seed.to_string())];
    if let Some(d) = &meta.config_digest {
        out.push(("config_digest".to_string(), d.clone()));
    }
    if let Some(w) = meta.wavelength {
        out.push(("wavelength_nm".to_string(), w.to_string()));
    }
    out
}

fn write_metadata<W: Write>(w: &mut W, meta: &Metadata) -> std::io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

/// Writes metadata, a header and rows of equal-length columns.
pub fn write_columns<W: Write>(
    mut w: W,
    meta: &Metadata,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), IoError> {
    write_metadata(&mut w, meta)?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(header)?;
    for row in rows {
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(w: W, trace: &CoincidenceTrace) -> Result<(), IoError> {
    let rows = trace.records.iter().map(|r| {
        vec![
            r.delta.to_string(),
            r.counts_a.to_string(),
            r.counts_b.to_string(),
            r.coincidences.to_string(),
            r.duration.to_string(),
        ]
    });
    write_columns(w, &trace_metadata(&trace.metadata), &TRACE_HEADER, rows)
}

pub fn write_exact<W: Write>(w: W, meta: &Metadata, points: &[ScanPoint]) -> Result<(), IoError> {
    let rows = points.iter().map(|p| {
        let (m3, m4) = p.distribution.mean_counts();
        vec![
            p.delta.to_string(),
            p.coincidence().to_string(),
            m3.to_string(),
            m4.to_string(),
        ]
    });
    write_columns(w, meta, &EXACT_HEADER, rows)
}

/// One-sided spectrum with the wavenumber axis in units of 1/λ.
pub fn write_spectrum<W: Write>(
    w: W,
    meta: &Metadata,
    spectrum: &Spectrum,
    wavelength: f64,
) -> Result<(), IoError> {
    let rows = spectrum
        .wavenumbers()
        .into_iter()
        .zip(spectrum.magnitudes())
        .map(|(k, m)| vec![(k * wavelength).to_string(), m.to_string()]);
    write_columns(w, meta, &SPECTRUM_HEADER, rows)
}

pub fn write_series<W: Write>(
    w: W,
    meta: &Metadata,
    value_name: &str,
    series: &Series,
) -> Result<(), IoError> {
    let rows = series
        .delta
        .iter()
        .zip(&series.values)
        .map(|(d, v)| vec![d.to_string(), v.to_string()]);
    write_columns(w, meta, &["delta_nm", value_name], rows)
}

/// Parsed table: metadata, header and raw rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metadata: Metadata,
    pub header: Vec<String>,
    pub rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub fn read_table<R: Read>(mut r: R) -> Result<Table, IoError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut metadata = Vec::new();
    for line in text.lines() {
        let Some(rest) = line.strip_prefix('#') else {
            break;
        };
        if let Some((k, v)) = rest.split_once(':') {
            metadata.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Table {
        metadata,
        header,
        rows,
    })
}

fn parse<T: std::str::FromStr>(line: u64, name: &str, s: &str) -> Result<T, IoError> {
    s.parse().map_err(|_| IoError::Malformed {
        line,
        message: format!("cannot parse {name} from {s:?}"),
    })
}

pub fn read_trace<R: Read>(r: R) -> Result<CoincidenceTrace, IoError> {
    let table = read_table(r)?;
    if table.header != TRACE_HEADER {
        return Err(IoError::Malformed {
            line: 1 + table.metadata.len() as u64,
            message: format!("expected header {}", TRACE_HEADER.join(",")),
        });
    }
    let mut records = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        records.push(CountRecord {
            delta: parse(*line, "delta_nm", &row[0])?,
            counts_a: parse(*line, "counts_a", &row[1])?,
            counts_b: parse(*line, "counts_b", &row[2])?,
            coincidences: parse(*line, "coincidences", &row[3])?,
            duration: parse(*line, "duration_s", &row[4])?,
        });
    }
    let seed = match table.meta("seed") {
        Some(s) => parse(0, "seed", s)?,
        None => 0,
    };
    let wavelength = table
        .meta("wavelength_nm")
        .map(|s| parse(0, "wavelength_nm", s))
        .transpose()?;
    let metadata = TraceMetadata {
        seed,
        config_digest: table.meta("config_digest").map(str::to_string),
        wavelength,
    };
    Ok(CoincidenceTrace::new(records, metadata)?)
}
