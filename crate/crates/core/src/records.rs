//! Prediction records shared by the PLS and LLM branches, and their CSV form.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::data::{Dataset, Property};

pub const PREDICTIONS_HEADER: [&str; 6] = ["model_name", "run", "sample", "property", "units", "predicted"];

/// Decimal places used when serializing PLS predictions.
pub const PLS_DECIMALS: u8 = 6;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("duplicate prediction for ({method}, run {run}, {sample}, {property})")]
    Duplicate {
        method: String,
        run: u32,
        sample: String,
        property: Property,
    },
    #[error("units {found:?} do not match {expected:?} for property {property}")]
    Units {
        property: Property,
        expected: &'static str,
        found: String,
    },
    #[error("predictions file: {0}")]
    Format(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRecord {
    pub method: String,
    pub run: u32,
    pub sample: String,
    pub property: Property,
    pub units: String,
    pub predicted: f64,
    /// Decimal places kept on serialization.
    #[serde(skip)]
    pub decimals: u8,
}

impl PredictionRecord {
    pub fn new(method: &str, run: u32, sample: &str, property: Property, predicted: f64, decimals: u8) -> Self {
        PredictionRecord {
            method: method.to_string(),
            run,
            sample: sample.to_string(),
            property,
            units: property.units().to_string(),
            predicted,
            decimals,
        }
    }

    pub fn key(&self) -> (&str, u32, &str, Property) {
        (&self.method, self.run, &self.sample, self.property)
    }

    pub fn predicted_text(&self) -> String {
        let d = self.decimals as usize;
        format!("{:.d$}", self.predicted)
    }
}

/// Rejects duplicate (method, run, sample, property) keys and unit mismatches.
pub fn check_records(records: &[PredictionRecord]) -> Result<(), RecordError> {
    let mut seen = HashSet::new();
    for r in records {
        if r.units != r.property.units() {
            return Err(RecordError::Units {
                property: r.property,
                expected: r.property.units(),
                found: r.units.clone(),
            });
        }
        if !seen.insert(r.key()) {
            return Err(RecordError::Duplicate {
                method: r.method.clone(),
                run: r.run,
                sample: r.sample.clone(),
                property: r.property,
            });
        }
    }
    Ok(())
}

/// Deterministic order: method, run, dataset position, property.
pub fn sort_records(records: &mut [PredictionRecord], ds: &Dataset) {
    records.sort_by_key(|r| {
        (
            r.method.clone(),
            r.run,
            ds.position(&r.sample).unwrap_or(usize::MAX),
            r.sample.clone(),
            r.property,
        )
    });
}

/// Writes the predictions CSV. `comment` lines are emitted first, each
/// prefixed with `# `.
pub fn write_predictions<W: Write>(records: &[PredictionRecord], comment: &[String], mut out: W) -> std::io::Result<()> {
    for c in comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{}", PREDICTIONS_HEADER.join(","))?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method,
            r.run,
            r.sample,
            r.property,
            r.units,
            r.predicted_text()
        )?;
    }
    Ok(())
}

pub fn read_predictions<R: Read>(reader: R) -> Result<Vec<PredictionRecord>, RecordError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != PREDICTIONS_HEADER {
        return Err(RecordError::Format(format!(
            "expected header {}, found {}",
            PREDICTIONS_HEADER.join(","),
            header.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| rec.get(j).unwrap_or("").to_string();
        let row = i + 1;
        let property = Property::parse(&field(3))
            .ok_or_else(|| RecordError::Format(format!("row {row}: unknown property {:?}", field(3))))?;
        let run = field(1)
            .parse::<u32>()
            .map_err(|_| RecordError::Format(format!("row {row}: bad run {:?}", field(1))))?;
        let raw = field(5);
        let predicted = raw
            .parse::<f64>()
            .map_err(|_| RecordError::Format(format!("row {row}: bad predicted value {raw:?}")))?;
        let decimals = raw.split_once('.').map_or(0, |(_, f)| f.len()) as u8;
        out.push(PredictionRecord {
            method: field(0),
            run,
            sample: field(2),
            property,
            units: field(4),
            predicted,
            decimals,
        });
    }
    check_records(&out)?;
    Ok(out)
}
