//! Outer leave-one-out × bootstrap × repeated-run protocol for the PLS branch.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::{DataError, Dataset, Property};
use crate::pls::{fit_pls, select_components, ComponentSelection, PlsError, PlsModel};
use crate::records::{PredictionRecord, PLS_DECIMALS};
use crate::standardize::{column_stats, Standardizer, VARIANCE_EPSILON};

pub const PLS_METHOD: &str = "PLS";

/// Redraw budget for degenerate bootstrap resamples.
pub const MAX_REDRAWS: u32 = 100;

/// Generator identity written into every output.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng/rand_chacha-0.9; fold_seed=splitmix64(run_seed^splitmix64(fold_index))";

pub const DEFAULT_SEEDS: [u64; 5] = [42, 43, 44, 45, 46];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("run {run}, fold {fold}: no usable bootstrap resample after {attempts} draws")]
    DegenerateResample { run: u32, fold: usize, attempts: u32 },
    #[error("run {run}, fold {fold}, {property}: {source}")]
    Fit {
        run: u32,
        fold: usize,
        property: Property,
        #[source]
        source: PlsError,
    },
    #[error("fold {fold}: {source}")]
    Standardize {
        fold: usize,
        #[source]
        source: DataError,
    },
    #[error("fold plan does not match dataset: {0}")]
    Plan(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    /// 1-based.
    pub fold_index: usize,
    pub held_out_id: String,
    pub training_ids: Vec<String>,
    /// Resample of `training_ids` drawn with replacement; absent in deterministic mode.
    pub bootstrap_ids: Option<Vec<String>>,
    /// Degenerate resamples discarded before `bootstrap_ids` was accepted.
    pub redraws: u32,
}

impl FoldPlan {
    /// Rows the models are fitted on: the bootstrap resample when present.
    pub fn fit_ids(&self) -> &[String] {
        self.bootstrap_ids.as_deref().unwrap_or(&self.training_ids)
    }

    pub fn validate(&self, ds: &Dataset) -> Result<(), PipelineError> {
        if ds.get(&self.held_out_id).is_none() {
            return Err(PipelineError::Plan(format!("unknown held-out id {}", self.held_out_id)));
        }
        if self.training_ids.contains(&self.held_out_id) {
            return Err(PipelineError::Plan(format!("{} is both held out and training", self.held_out_id)));
        }
        if self.training_ids.len() + 1 != ds.len() || self.training_ids.iter().any(|id| ds.get(id).is_none()) {
            return Err(PipelineError::Plan("training ids must be every other sample".into()));
        }
        if let Some(b) = &self.bootstrap_ids {
            if b.len() != self.training_ids.len() || b.iter().any(|id| !self.training_ids.contains(id)) {
                return Err(PipelineError::Plan("bootstrap ids must be drawn from training ids".into()));
            }
        }
        Ok(())
    }
}

/// One fold per sample, in dataset order.
pub fn make_folds(ds: &Dataset) -> Vec<FoldPlan> {
    let ids = ds.ids();
    ids.iter()
        .enumerate()
        .map(|(i, held)| FoldPlan {
            fold_index: i + 1,
            held_out_id: held.to_string(),
            training_ids: ids
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, id)| id.to_string())
                .collect(),
            bootstrap_ids: None,
            redraws: 0,
        })
        .collect()
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the per-fold generator derived from a run seed.
pub fn fold_seed(run_seed: u64, fold_index: usize) -> u64 {
    splitmix64(run_seed ^ splitmix64(fold_index as u64))
}

pub fn fold_rng(run_seed: u64, fold_index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(fold_seed(run_seed, fold_index))
}

/// True when the rows give a usable standardizer and non-constant targets.
fn resample_is_usable(ds: &Dataset, ids: &[String]) -> bool {
    let rows: Vec<[f64; 4]> = ids.iter().map(|id| ds.get(id).unwrap().descriptors()).collect();
    if Standardizer::fit_rows(&rows).is_err() {
        return false;
    }
    let targets = DMatrix::from_fn(ids.len(), 3, |i, j| ds.get(&ids[i]).unwrap().target(Property::ALL[j]));
    column_stats(&targets).1.iter().all(|s| *s >= VARIANCE_EPSILON)
}

/// Draws |training| ids with replacement, redrawing degenerate resamples.
pub fn draw_bootstrap<R: Rng + ?Sized>(fold: &FoldPlan, ds: &Dataset, rng: &mut R) -> Result<FoldPlan, PipelineError> {
    let m = fold.training_ids.len();
    for attempt in 0..=MAX_REDRAWS {
        let ids: Vec<String> = (0..m)
            .map(|_| fold.training_ids[rng.random_range(0..m)].clone())
            .collect();
        if resample_is_usable(ds, &ids) {
            return Ok(FoldPlan {
                bootstrap_ids: Some(ids),
                redraws: attempt,
                ..fold.clone()
            });
        }
    }
    Err(PipelineError::DegenerateResample {
        run: 0,
        fold: fold.fold_index,
        attempts: MAX_REDRAWS + 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub bootstrap: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seeds: DEFAULT_SEEDS.to_vec(),
            bootstrap: true,
        }
    }
}

impl RunConfig {
    pub fn new(seeds: Vec<u64>, bootstrap: bool) -> Result<Self, PipelineError> {
        let cfg = RunConfig { seeds, bootstrap };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n_runs(&self) -> usize {
        self.seeds.len()
    }

    pub fn rng_algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.seeds.is_empty() {
            return Err(PipelineError::Config("at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(PipelineError::Config("seeds must be distinct".into()));
        }
        Ok(())
    }
}

/// Everything fitted inside one fold for one property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldModel {
    pub property: Property,
    pub standardizer: Standardizer,
    pub selection: ComponentSelection,
    pub model: PlsModel,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldFit {
    pub run: u32,
    pub plan: FoldPlan,
    pub models: Vec<FoldModel>,
}

/// Standardize on the fit rows, select k by inner LOOCV, refit and predict
/// the held-out sample once per property.
pub fn fit_fold(ds: &Dataset, fold: &FoldPlan, run: u32) -> Result<Vec<FoldModel>, PipelineError> {
    fold.validate(ds)?;
    let ids = fold.fit_ids();
    let rows: Vec<[f64; 4]> = ids.iter().map(|id| ds.get(id).unwrap().descriptors()).collect();
    let std = Standardizer::fit_rows(&rows).map_err(|source| PipelineError::Standardize {
        fold: fold.fold_index,
        source,
    })?;
    let z = std.standardize_matrix(&crate::standardize::rows_to_matrix(&rows));
    let held = std.standardize(&ds.get(&fold.held_out_id).unwrap().descriptors());

    Property::ALL
        .iter()
        .map(|&property| {
            let wrap = |source| PipelineError::Fit {
                run,
                fold: fold.fold_index,
                property,
                source,
            };
            let y = DVector::from_iterator(ids.len(), ids.iter().map(|id| ds.get(id).unwrap().target(property)));
            let selection = select_components(&z, &y).map_err(wrap)?;
            let model = fit_pls(&z, &y, selection.chosen_k).map_err(wrap)?;
            let prediction = model.predict(&held);
            Ok(FoldModel {
                property,
                standardizer: std.clone(),
                selection,
                model,
                prediction,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PlsBranch {
    pub records: Vec<PredictionRecord>,
    pub fits: Vec<FoldFit>,
}

/// Runs the PLS branch for every seed and fold. Records come out ordered by
/// run, fold, property regardless of scheduling.
pub fn run_pls_branch(ds: &Dataset, cfg: &RunConfig) -> Result<PlsBranch, PipelineError> {
    cfg.validate()?;
    let folds = make_folds(ds);
    let jobs: Vec<(u32, u64, &FoldPlan)> = cfg
        .seeds
        .iter()
        .enumerate()
        .flat_map(|(r, &seed)| folds.iter().map(move |f| (r as u32 + 1, seed, f)))
        .collect();

    let fits: Vec<FoldFit> = jobs
        .par_iter()
        .map(|&(run, seed, fold)| {
            let plan = if cfg.bootstrap {
                let mut rng = fold_rng(seed, fold.fold_index);
                draw_bootstrap(fold, ds, &mut rng).map_err(|e| match e {
                    PipelineError::DegenerateResample { fold, attempts, .. } => {
                        PipelineError::DegenerateResample { run, fold, attempts }
                    }
                    other => other,
                })?
            } else {
                fold.clone()
            };
            if plan.redraws > 0 {
                log::info!("run {run}, fold {}: {} degenerate resample(s) redrawn", plan.fold_index, plan.redraws);
            }
            let models = fit_fold(ds, &plan, run)?;
            Ok(FoldFit { run, plan, models })
        })
        .collect::<Result<_, PipelineError>>()?;

    let records = fits
        .iter()
        .flat_map(|fit| {
            fit.models.iter().map(move |m| {
                PredictionRecord::new(PLS_METHOD, fit.run, &fit.plan.held_out_id, m.property, m.prediction, PLS_DECIMALS)
            })
        })
        .collect();
    Ok(PlsBranch { records, fits })
}
