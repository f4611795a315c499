//! Leakage-free benchmarking of a PLS regression baseline against LLM
//! predictors on small structure–property datasets.
//!
//! The crate covers the whole protocol: dataset handling and fold-wise
//! z-scoring, a PLS1 engine with inner leave-one-out component selection,
//! the outer LOOCV × bootstrap × repeated-run pipeline, prompt rendering and
//! response ingestion for LLMs, the statistics suite and the reporting CLI.

pub mod cli;
pub mod correlation;
pub mod data;
pub mod llm;
pub mod pipeline;
pub mod pls;
pub mod records;
pub mod report;
pub mod standardize;
pub mod stats;

pub use correlation::{correlation_matrix, pearson, CorrelationMatrix};
pub use data::{load_dataset, write_dataset, Dataset, Descriptor, MembraneSample, Property};
pub use pls::{fit_pls, select_components, ComponentSelection, PlsModel};
pub use standardize::Standardizer;
pub use pipeline::{make_folds, run_pls_branch, FoldPlan, RunConfig};
pub use records::PredictionRecord;
