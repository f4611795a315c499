//! Method-versus-baseline contrasts per property: Wilcoxon on paired
//! absolute errors, BH within the property family, ΔRMSE with a bootstrap CI.

use serde::Serialize;

use super::effect::{delta_rmse, paired_bootstrap_ci, PairedErrors};
use super::fdr::bh_fdr;
use super::metrics::{MethodSummary, ResidualRecord};
use super::wilcoxon::{wilcoxon_signed_rank, PMethod};
use super::StatsError;
use crate::data::Property;

pub const FDR_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Annotation {
    #[serde(rename = "**")]
    HighlySignificant,
    #[serde(rename = "*")]
    Significant,
    #[serde(rename = "n.s.")]
    NotSignificant,
}

impl Annotation {
    pub fn from_q(q: f64) -> Annotation {
        if q < 0.01 {
            Annotation::HighlySignificant
        } else if q < 0.05 {
            Annotation::Significant
        } else {
            Annotation::NotSignificant
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Annotation::HighlySignificant => "**",
            Annotation::Significant => "*",
            Annotation::NotSignificant => "n.s.",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonResult {
    pub method: String,
    pub baseline: String,
    pub property: Property,
    pub n_pairs: usize,
    pub n_zero_diffs: usize,
    pub n_tie_groups: usize,
    pub w_plus: f64,
    pub p_method: PMethod,
    pub p_value: f64,
    pub q_value: f64,
    pub annotation: Annotation,
    pub reject: bool,
    /// ΔRMSE from run-averaged RMSEs.
    pub delta_rmse_pct: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Median of the bootstrap ΔRMSE distribution.
    pub bootstrap_median: f64,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub baseline: String,
    pub replicates: usize,
    pub seed: u64,
    pub fdr_level: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            baseline: crate::pipeline::PLS_METHOD.to_string(),
            replicates: super::effect::DEFAULT_REPLICATES,
            seed: super::effect::DEFAULT_CI_SEED,
            fdr_level: FDR_LEVEL,
        }
    }
}

/// All non-baseline methods against the baseline for one property. The BH
/// family is the set of contrasts for this property.
pub fn compare_property(
    residuals: &[ResidualRecord],
    summaries: &[MethodSummary],
    property: Property,
    opts: &CompareOptions,
) -> Result<Vec<ComparisonResult>, StatsError> {
    let base_res: Vec<ResidualRecord> = residuals
        .iter()
        .filter(|r| r.method == opts.baseline && r.property == property)
        .cloned()
        .collect();
    let summary_of = |m: &str| {
        summaries
            .iter()
            .find(|s| s.method == m && s.property == property)
            .ok_or_else(|| StatsError::Grouping(format!("no run summary for {m}/{property}")))
    };
    let base_rmse = summary_of(&opts.baseline)?.rmse.mean;

    let mut methods: Vec<&str> = residuals
        .iter()
        .filter(|r| r.property == property && r.method != opts.baseline)
        .map(|r| r.method.as_str())
        .collect();
    methods.sort_unstable();
    methods.dedup();

    let mut partial = Vec::new();
    for m in &methods {
        let mres: Vec<ResidualRecord> = residuals
            .iter()
            .filter(|r| r.method == *m && r.property == property)
            .cloned()
            .collect();
        let pairs = PairedErrors::pair(&mres, &base_res, property)?;
        let w = wilcoxon_signed_rank(&pairs.differences())?;
        let delta = delta_rmse(summary_of(m)?.rmse.mean, base_rmse)?;
        let ci = paired_bootstrap_ci(&pairs, opts.replicates, opts.seed)?;
        partial.push((m.to_string(), pairs.len(), w, delta, ci));
    }
    let p: Vec<f64> = partial.iter().map(|t| t.2.p_value).collect();
    let bh = bh_fdr(&p, opts.fdr_level)?;
    Ok(partial
        .into_iter()
        .enumerate()
        .map(|(i, (method, n_pairs, w, delta, ci))| ComparisonResult {
            method,
            baseline: opts.baseline.clone(),
            property,
            n_pairs,
            n_zero_diffs: w.n_zeros,
            n_tie_groups: w.n_tie_groups,
            w_plus: w.w_plus,
            p_method: w.method,
            p_value: w.p_value,
            q_value: bh.q_values[i],
            annotation: Annotation::from_q(bh.q_values[i]),
            reject: bh.reject[i],
            delta_rmse_pct: delta,
            ci_low: ci.low,
            ci_high: ci.high,
            bootstrap_median: ci.median,
            replicates: ci.replicates,
            seed: ci.seed,
        })
        .collect())
}

pub fn compare_all(
    residuals: &[ResidualRecord],
    summaries: &[MethodSummary],
    properties: &[Property],
    opts: &CompareOptions,
) -> Result<Vec<ComparisonResult>, StatsError> {
    let mut out = Vec::new();
    for &p in properties {
        out.extend(compare_property(residuals, summaries, p, opts)?);
    }
    Ok(out)
}
