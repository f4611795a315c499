//! Metrics, paired tests, multiple-testing control and effect sizes.

pub mod compare;
pub mod effect;
pub mod fdr;
pub mod metrics;
pub mod wilcoxon;

use thiserror::Error;

pub use compare::{compare_all, compare_property, Annotation, CompareOptions, ComparisonResult};
pub use effect::{delta_rmse, paired_bootstrap_ci, BootstrapCi, PairedErrors};
pub use fdr::{bh_adjust, bh_fdr, BhResult};
pub use metrics::{
    compute_residuals, run_metrics, run_summaries, summarize_runs, MeanSd, MethodSummary, Metrics, ResidualRecord,
    RunSummary,
};
pub use wilcoxon::{wilcoxon_signed_rank, PMethod, WilcoxonResult};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("join error: {0}")]
    Join(String),
    #[error("grouping error: {0}")]
    Grouping(String),
    #[error("pairing error: {0}")]
    Pairing(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("undefined effect: {0}")]
    UndefinedEffect(String),
}

/// Linear interpolation between closest ranks (R type 7) on sorted data.
pub fn quantile_type7(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
