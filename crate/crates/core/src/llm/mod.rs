//! Knowledge-driven branch: prompt rendering, endpoint access, response
//! parsing and offline ingestion of stored responses.

pub mod client;
pub mod ingest;
pub mod parse;
pub mod prompt;

use std::path::PathBuf;

use thiserror::Error;

use crate::data::Property;

pub use client::{load_endpoints, LlmClient, LlmEndpointSpec, QueryOutcome, ReqwestTransport, Transport};
pub use ingest::{ingest_response_dir, response_path, write_response, IngestReport};
pub use parse::{canonical_csv, parse_llm_csv, LlmResponseBatch, ParseMode, ResponseContext};
pub use prompt::{render_prompt, PromptTemplate};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("template error: {0}")]
    Template(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("leakage/confusion: response predicts {found:?} but the held-out sample is {expected}")]
    Leakage { expected: String, found: String },
    #[error("incomplete response: missing {0:?}")]
    Incomplete(Vec<Property>),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("over-prediction: {0} data rows, expected 3")]
    OverPrediction(usize),
    #[error("property {0} predicted more than once")]
    DuplicateProperty(Property),
    #[error("units {found:?} for {property}, expected {:?}", property.units())]
    Units { property: Property, found: String },
    #[error("duplicate record: {0}")]
    Duplicate(String),
    #[error("archive layout: {0}")]
    Layout(String),
    #[error("endpoint error: {0}")]
    Endpoint(String),
    #[error("empty completion from {0}")]
    EmptyResponse(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<LlmError>,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LlmError {
    /// True for failures talking to a model endpoint.
    pub fn is_network(&self) -> bool {
        match self {
            LlmError::Endpoint(_) | LlmError::EmptyResponse(_) => true,
            LlmError::File { source, .. } => source.is_network(),
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            LlmError::Io { .. } => true,
            LlmError::File { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
