//! Stored-response archive: `<model>/<run>/<fold>.csv`.
//!
//! Run and fold directory/file names are read by their trailing digits, so
//! `run3/fold07.csv` and `3/7.csv` are equivalent. Folds are 1-based and
//! follow dataset order (fold i holds out the i-th sample).

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::parse::{parse_llm_csv, LlmResponseBatch, ParseMode, ResponseContext};
use super::LlmError;
use crate::data::Dataset;
use crate::pipeline::make_folds;
use crate::records::PredictionRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct IngestReport {
    pub records: Vec<PredictionRecord>,
    pub files: usize,
    pub skipped: Vec<SkippedFile>,
    pub warnings: Vec<String>,
}

fn trailing_number(name: &str) -> Option<u32> {
    let digits: String = name
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, LlmError> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| LlmError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
        .collect();
    v.sort();
    Ok(v)
}

fn file_label(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Parses one stored response for a known (model, run, fold).
pub fn parse_response_file(
    path: &Path,
    model: &str,
    run: u32,
    fold_index: usize,
    ds: &Dataset,
    mode: ParseMode,
) -> Result<LlmResponseBatch, LlmError> {
    let with_path = |e: LlmError| LlmError::File {
        path: path.to_path_buf(),
        source: Box::new(e),
    };
    let held = ds
        .samples()
        .get(fold_index.wrapping_sub(1))
        .ok_or_else(|| with_path(LlmError::Layout(format!("fold {fold_index} outside 1..={}", ds.len()))))?;
    let raw = fs::read_to_string(path).map_err(|e| LlmError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_llm_csv(
        &raw,
        ResponseContext {
            model,
            run,
            fold_index,
            held_out_id: &held.id,
        },
        mode,
    )
    .map_err(with_path)
}

/// Walks the archive. Strict mode stops at the first bad file; lenient mode
/// skips it and reports. Duplicate (model, run, sample, property) keys are
/// always an error.
pub fn ingest_response_dir(dir: &Path, ds: &Dataset, mode: ParseMode) -> Result<IngestReport, LlmError> {
    let folds = make_folds(ds);
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    for model_dir in sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()) {
        let model = file_label(&model_dir);
        for run_dir in sorted_entries(&model_dir)?.into_iter().filter(|p| p.is_dir()) {
            let run = trailing_number(&file_label(&run_dir)).ok_or_else(|| {
                LlmError::Layout(format!("{}: run directory needs a trailing number", run_dir.display()))
            })?;
            for file in sorted_entries(&run_dir)? {
                if file.extension().and_then(|e| e.to_str()) != Some("csv") {
                    continue;
                }
                report.files += 1;
                let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                let parsed = match trailing_number(&stem) {
                    Some(f) if f >= 1 && (f as usize) <= folds.len() => {
                        parse_response_file(&file, &model, run, f as usize, ds, mode)
                    }
                    _ => Err(LlmError::File {
                        path: file.clone(),
                        source: Box::new(LlmError::Layout(format!("cannot read a fold index 1..={} from the name", folds.len()))),
                    }),
                };
                match parsed {
                    Ok(batch) => {
                        for w in &batch.warnings {
                            report.warnings.push(format!("{}: {w}", file.display()));
                        }
                        for r in batch.parsed {
                            let key = (r.method.clone(), r.run, r.sample.clone(), r.property);
                            if !seen.insert(key) {
                                return Err(LlmError::File {
                                    path: file.clone(),
                                    source: Box::new(LlmError::Duplicate(format!(
                                        "({}, run {}, {}, {}) already ingested",
                                        r.method, r.run, r.sample, r.property
                                    ))),
                                });
                            }
                            report.records.push(r);
                        }
                    }
                    Err(e) if mode == ParseMode::Lenient => {
                        log::warn!("skipping {e}");
                        report.skipped.push(SkippedFile {
                            path: file.clone(),
                            reason: e.to_string(),
                        });
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    crate::records::sort_records(&mut report.records, ds);
    Ok(report)
}

/// Where a response for (model, run, fold) is archived.
pub fn response_path(root: &Path, model: &str, run: u32, fold_index: usize) -> PathBuf {
    root.join(model).join(format!("run{run}")).join(format!("fold{fold_index:02}.csv"))
}

pub fn write_response(root: &Path, model: &str, run: u32, fold_index: usize, raw: &str) -> Result<PathBuf, LlmError> {
    let path = response_path(root, model, run, fold_index);
    let io = |e| LlmError::Io {
        path: path.clone(),
        source: e,
    };
    fs::create_dir_all(path.parent().unwrap_or(root)).map_err(io)?;
    fs::write(&path, raw).map_err(io)?;
    Ok(path)
}
