//! CSV ingestion and re-serialization of samples.

use std::io::{Read, Write};

use rdjoint_core::Sample;
use thiserror::Error;

use crate::error::CliError;

/// Column names for the running variable, outcome and optional treatment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub running: String,
    pub outcome: String,
    pub treatment: Option<String>,
}

impl Schema {
    pub fn new(running: &str, outcome: &str, treatment: Option<&str>) -> Self {
        Schema {
            running: running.to_string(),
            outcome: outcome.to_string(),
            treatment: treatment.map(str::to_string),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("missing column \"{0}\"")]
    MissingColumn(String),
    #[error("line {line}: column \"{column}\": cannot parse {value:?} as a finite number")]
    Parse { line: u64, column: String, value: String },
    #[error("line {line}: treatment must be 0 or 1, got {value}")]
    Treatment { line: u64, value: f64 },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Sample(#[from] rdjoint_core::Error),
}

impl LoadError {
    pub fn code(&self) -> &'static str {
        match self {
            LoadError::MissingColumn(_) => "missing_column",
            LoadError::Parse { .. } => "parse_error",
            LoadError::Treatment { .. } => "domain",
            LoadError::Csv(_) => "malformed_csv",
            LoadError::Sample(e) => e.code(),
        }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        CliError::usage(e.code(), e.to_string())
    }
}

/// Reads a header-led CSV. Any missing, unparsable or non-finite required
/// cell rejects the whole file.
pub fn load_sample<R: Read>(source: R, schema: &Schema, cutoff: f64) -> Result<Sample, LoadError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LoadError::MissingColumn(name.to_string()))
    };
    let ix = find(&schema.running)?;
    let iy = find(&schema.outcome)?;
    let it = schema.treatment.as_deref().map(find).transpose()?;

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut t = it.map(|_| Vec::new());
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |i: usize, column: &str| -> Result<f64, LoadError> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| LoadError::Parse {
                    line,
                    column: column.to_string(),
                    value: raw.to_string(),
                })
        };
        x.push(cell(ix, &schema.running)?);
        y.push(cell(iy, &schema.outcome)?);
        if let (Some(i), Some(t), Some(name)) = (it, t.as_mut(), schema.treatment.as_deref()) {
            let value = cell(i, name)?;
            if value != 0.0 && value != 1.0 {
                return Err(LoadError::Treatment { line, value });
            }
            t.push(value);
        }
    }
    Ok(Sample::new(x, y, t, cutoff)?)
}

/// Writes a sample back as CSV. Values use the shortest decimal form that
/// parses back to the same double.
pub fn write_sample<W: Write>(sample: &Sample, schema: &Schema, sink: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec![schema.running.as_str(), schema.outcome.as_str()];
    if let (Some(name), Some(_)) = (schema.treatment.as_deref(), sample.treatment()) {
        header.push(name);
    }
    w.write_record(&header)?;
    for i in 0..sample.len() {
        let mut row = vec![sample.running()[i].to_string(), sample.outcome()[i].to_string()];
        if let (Some(_), Some(t)) = (schema.treatment.as_deref(), sample.treatment()) {
            row.push(t[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
