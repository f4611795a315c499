//! Membrane dataset: the descriptor/target vocabulary, CSV I/O and validation.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical header of the dataset CSV.
pub const DATASET_HEADER: [&str; 8] = [
    "sample", "pd_um", "ca_deg", "t_mm", "p_pct", "e_nmm2", "ts_nmm2", "el_pct",
];

/// Column precision (decimal places) used when a dataset is built in code.
const DEFAULT_DECIMALS: [usize; 7] = [3, 1, 3, 2, 2, 2, 2];

const BUNDLED_CSV: &str = include_str!("../data/membranes.csv");

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at row {row}, column `{column}`: cannot read {value:?} as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("invalid sample {sample}: {reason}")]
    Validation { sample: String, reason: String },
    #[error("dataset has {0} samples, at least 3 are required")]
    TooFewSamples(usize),
    #[error("degenerate variance in {column}: sigma = {sigma:e}")]
    DegenerateVariance { column: String, sigma: f64 },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Structural descriptors used as predictors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Descriptor {
    /// Pore diameter, μm.
    Pd,
    /// Contact angle, degrees.
    Ca,
    /// Thickness, mm.
    T,
    /// Porosity, %.
    P,
}

impl Descriptor {
    pub const ALL: [Descriptor; 4] = [Descriptor::Pd, Descriptor::Ca, Descriptor::T, Descriptor::P];

    pub fn label(self) -> &'static str {
        match self {
            Descriptor::Pd => "PD",
            Descriptor::Ca => "CA",
            Descriptor::T => "T",
            Descriptor::P => "P",
        }
    }

    pub fn column(self) -> &'static str {
        DATASET_HEADER[1 + self as usize]
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Mechanical target properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Property {
    /// Young's modulus.
    E,
    /// Tensile strength.
    Ts,
    /// Elongation at break.
    El,
}

impl Property {
    pub const ALL: [Property; 3] = [Property::E, Property::Ts, Property::El];

    pub fn label(self) -> &'static str {
        match self {
            Property::E => "E",
            Property::Ts => "TS",
            Property::El => "EL",
        }
    }

    /// Unit string that must appear verbatim in prediction records.
    pub fn units(self) -> &'static str {
        match self {
            Property::E | Property::Ts => "N/mm^2",
            Property::El => "%",
        }
    }

    pub fn column(self) -> &'static str {
        DATASET_HEADER[5 + self as usize]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(label: &str) -> Option<Property> {
        match label {
            "E" => Some(Property::E),
            "TS" => Some(Property::Ts),
            "EL" => Some(Property::El),
            _ => None,
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Property {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Property::parse(s).ok_or_else(|| format!("unknown property {s:?} (expected E, TS or EL)"))
    }
}

/// One membrane specimen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembraneSample {
    pub id: String,
    /// Pore diameter, μm.
    pub pd: f64,
    /// Contact angle, degrees.
    pub ca: f64,
    /// Thickness, mm.
    pub t: f64,
    /// Porosity, %.
    pub p: f64,
    /// Young's modulus, N/mm².
    pub e: f64,
    /// Tensile strength, N/mm².
    pub ts: f64,
    /// Elongation at break, %.
    pub el: f64,
}

impl MembraneSample {
    pub fn descriptors(&self) -> [f64; 4] {
        [self.pd, self.ca, self.t, self.p]
    }

    pub fn descriptor(&self, d: Descriptor) -> f64 {
        self.descriptors()[d.index()]
    }

    pub fn target(&self, prop: Property) -> f64 {
        match prop {
            Property::E => self.e,
            Property::Ts => self.ts,
            Property::El => self.el,
        }
    }

    pub fn target_mut(&mut self, prop: Property) -> &mut f64 {
        match prop {
            Property::E => &mut self.e,
            Property::Ts => &mut self.ts,
            Property::El => &mut self.el,
        }
    }

    fn values(&self) -> [f64; 7] {
        [self.pd, self.ca, self.t, self.p, self.e, self.ts, self.el]
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |reason: String| DataError::Validation {
            sample: self.id.clone(),
            reason,
        };
        if self.id.trim().is_empty() {
            return Err(fail("empty sample id".into()));
        }
        for (name, v) in DATASET_HEADER[1..].iter().zip(self.values()) {
            if !v.is_finite() {
                return Err(fail(format!("{name} is not finite")));
            }
        }
        if self.pd <= 0.0 {
            return Err(fail(format!("pd_um must be > 0, got {}", self.pd)));
        }
        if self.t <= 0.0 {
            return Err(fail(format!("t_mm must be > 0, got {}", self.t)));
        }
        if !(self.p > 0.0 && self.p < 100.0) {
            return Err(fail(format!("p_pct must lie in (0, 100), got {}", self.p)));
        }
        if !(self.ca > 0.0 && self.ca < 180.0) {
            return Err(fail(format!("ca_deg must lie in (0, 180), got {}", self.ca)));
        }
        for prop in Property::ALL {
            if self.target(prop) <= 0.0 {
                return Err(fail(format!("{} must be > 0", prop.column())));
            }
        }
        Ok(())
    }
}

/// An ordered, validated collection of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<MembraneSample>,
    decimals: [usize; 7],
}

impl Dataset {
    pub fn new(samples: Vec<MembraneSample>) -> Result<Self, DataError> {
        Self::with_decimals(samples, DEFAULT_DECIMALS)
    }

    fn with_decimals(samples: Vec<MembraneSample>, decimals: [usize; 7]) -> Result<Self, DataError> {
        if samples.len() < 3 {
            return Err(DataError::TooFewSamples(samples.len()));
        }
        let mut seen = HashSet::new();
        for s in &samples {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                return Err(DataError::Validation {
                    sample: s.id.clone(),
                    reason: "duplicate sample id".into(),
                });
            }
        }
        Ok(Dataset { samples, decimals })
    }

    /// The ten-specimen polysulfone membrane table shipped with the crate.
    pub fn canonical() -> Self {
        read_dataset(BUNDLED_CSV.as_bytes()).expect("bundled dataset is valid")
    }

    pub fn samples(&self) -> &[MembraneSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.samples.iter().map(|s| s.id.as_str()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&MembraneSample> {
        self.samples.iter().find(|s| s.id == id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.samples.iter().position(|s| s.id == id)
    }

    /// Decimal places per numeric column, as observed on load.
    pub fn decimals(&self) -> [usize; 7] {
        self.decimals
    }

    pub fn descriptor_decimals(&self, d: Descriptor) -> usize {
        self.decimals[d.index()]
    }

    pub fn target_decimals(&self, p: Property) -> usize {
        self.decimals[4 + p.index()]
    }

    /// Column of one target across all samples.
    pub fn target_column(&self, prop: Property) -> Vec<f64> {
        self.samples.iter().map(|s| s.target(prop)).collect()
    }

    pub fn descriptor_column(&self, d: Descriptor) -> Vec<f64> {
        self.samples.iter().map(|s| s.descriptor(d)).collect()
    }

    /// Numeric column by canonical index (0..7: PD, CA, T, P, E, TS, EL).
    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.values()[idx]).collect()
    }

    /// Returns a copy with one target value replaced.
    pub fn with_target(&self, id: &str, prop: Property, value: f64) -> Result<Self, DataError> {
        let mut samples = self.samples.clone();
        let s = samples
            .iter_mut()
            .find(|s| s.id == id)
            .ok_or_else(|| DataError::Validation {
                sample: id.to_string(),
                reason: "unknown sample id".into(),
            })?;
        *s.target_mut(prop) = value;
        Self::with_decimals(samples, self.decimals)
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    read_dataset(text.as_bytes())
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    check_header(&header)?;

    let mut samples = Vec::new();
    let mut decimals = [0usize; 7];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let mut vals = [0.0; 7];
        for (j, v) in vals.iter_mut().enumerate() {
            let raw = rec.get(j + 1).unwrap_or("");
            *v = raw.parse::<f64>().map_err(|_| DataError::Parse {
                row,
                column: DATASET_HEADER[j + 1].to_string(),
                value: raw.to_string(),
            })?;
            let places = raw.split_once('.').map_or(0, |(_, frac)| frac.len());
            decimals[j] = decimals[j].max(places);
        }
        samples.push(MembraneSample {
            id: rec.get(0).unwrap_or("").to_string(),
            pd: vals[0],
            ca: vals[1],
            t: vals[2],
            p: vals[3],
            e: vals[4],
            ts: vals[5],
            el: vals[6],
        });
    }
    Dataset::with_decimals(samples, decimals)
}

fn check_header(header: &[String]) -> Result<(), DataError> {
    for col in DATASET_HEADER {
        if !header.iter().any(|h| h == col) {
            return Err(DataError::Schema(format!("missing column `{col}`")));
        }
    }
    for h in header {
        if !DATASET_HEADER.contains(&h.as_str()) {
            return Err(DataError::Schema(format!("unexpected column `{h}`")));
        }
    }
    if header.len() != DATASET_HEADER.len() || header.iter().zip(DATASET_HEADER).any(|(h, c)| h != c) {
        return Err(DataError::Schema(format!(
            "columns must appear in the order {}",
            DATASET_HEADER.join(",")
        )));
    }
    Ok(())
}

/// Writes the dataset in canonical form: canonical header, `\n` line endings and
/// each column at the precision observed on load.
pub fn write_dataset<W: Write>(ds: &Dataset, mut out: W) -> io::Result<()> {
    writeln!(out, "{}", DATASET_HEADER.join(","))?;
    for s in &ds.samples {
        write!(out, "{}", s.id)?;
        for (v, places) in s.values().iter().zip(ds.decimals) {
            write!(out, ",{v:.places$}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
