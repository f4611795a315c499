//! Out-of-fold residuals and the per-run RMSE / MAE / R² summaries.

use std::collections::BTreeMap;

use serde::Serialize;

use super::StatsError;
use crate::data::{Dataset, Property};
use crate::records::PredictionRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRecord {
    pub method: String,
    pub run: u32,
    pub sample: String,
    pub property: Property,
    /// predicted − actual, property units.
    pub residual: f64,
    pub abs_error: f64,
}

pub fn compute_residuals(preds: &[PredictionRecord], ds: &Dataset) -> Result<Vec<ResidualRecord>, StatsError> {
    preds
        .iter()
        .map(|p| {
            let actual = ds
                .get(&p.sample)
                .ok_or_else(|| StatsError::Join(format!("sample {} not in dataset", p.sample)))?
                .target(p.property);
            let residual = p.predicted - actual;
            Ok(ResidualRecord {
                method: p.method.clone(),
                run: p.run,
                sample: p.sample.clone(),
                property: p.property,
                residual,
                abs_error: residual.abs(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
}

/// RMSE and MAE over n residuals; R² = 1 − SSE/SST with the mean of the
/// same n actuals. R² is never clamped.
pub fn run_metrics(residuals: &[f64], actuals: &[f64]) -> Result<Metrics, StatsError> {
    if residuals.len() != actuals.len() || residuals.is_empty() {
        return Err(StatsError::Grouping(format!(
            "{} residuals for {} actuals",
            residuals.len(),
            actuals.len()
        )));
    }
    let n = residuals.len() as f64;
    let sse: f64 = residuals.iter().map(|e| e * e).sum();
    let mae = residuals.iter().map(|e| e.abs()).sum::<f64>() / n;
    let mean = actuals.iter().sum::<f64>() / n;
    let sst: f64 = actuals.iter().map(|y| (y - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(StatsError::Grouping("actuals have zero variance; R² undefined".into()));
    }
    Ok(Metrics {
        rmse: (sse / n).sqrt(),
        mae,
        r2: 1.0 - sse / sst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub method: String,
    pub property: Property,
    pub run: u32,
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
}

/// One summary per (method, property, run); each group must cover every
/// sample of the dataset exactly once.
pub fn run_summaries(residuals: &[ResidualRecord], ds: &Dataset) -> Result<Vec<RunSummary>, StatsError> {
    let mut groups: BTreeMap<(String, Property, u32), Vec<&ResidualRecord>> = BTreeMap::new();
    for r in residuals {
        groups.entry((r.method.clone(), r.property, r.run)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((method, property, run), rs)| {
            let mut ordered = vec![None; ds.len()];
            for r in &rs {
                let pos = ds
                    .position(&r.sample)
                    .ok_or_else(|| StatsError::Join(format!("sample {} not in dataset", r.sample)))?;
                if ordered[pos].replace(r.residual).is_some() {
                    return Err(StatsError::Grouping(format!(
                        "{method}/{property}/run {run}: sample {} predicted twice",
                        r.sample
                    )));
                }
            }
            let residuals: Vec<f64> = ordered
                .into_iter()
                .collect::<Option<_>>()
                .ok_or_else(|| {
                    StatsError::Grouping(format!(
                        "{method}/{property}/run {run}: {} of {} samples predicted",
                        rs.len(),
                        ds.len()
                    ))
                })?;
            let m = run_metrics(&residuals, &ds.target_column(property))?;
            Ok(RunSummary {
                method,
                property,
                run,
                rmse: m.rmse,
                mae: m.mae,
                r2: m.r2,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample SD (divisor n−1); 0 for a single run.
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> MeanSd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanSd { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub property: Property,
    pub n_runs: usize,
    pub rmse: MeanSd,
    pub mae: MeanSd,
    pub r2: MeanSd,
    /// Set when only one run was available and the SDs are placeholders.
    pub single_run: bool,
}

/// Mean ± SD across runs per (method, property), sorted by method then property.
pub fn summarize_runs(runs: &[RunSummary]) -> Vec<MethodSummary> {
    let mut groups: BTreeMap<(String, Property), Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.method.clone(), r.property)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((method, property), rs)| {
            let pick = |f: fn(&RunSummary) -> f64| MeanSd::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            MethodSummary {
                method,
                property,
                n_runs: rs.len(),
                rmse: pick(|r| r.rmse),
                mae: pick(|r| r.mae),
                r2: pick(|r| r.r2),
                single_run: rs.len() < 2,
            }
        })
        .collect()
}
