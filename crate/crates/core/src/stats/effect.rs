//! RMSE effect sizes against a baseline and their paired-bootstrap intervals.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::metrics::ResidualRecord;
use super::{quantile_type7, StatsError};
use crate::data::Property;
use crate::pipeline::splitmix64;

pub const DEFAULT_REPLICATES: usize = 10_000;
pub const DEFAULT_CI_SEED: u64 = 20_240_601;

/// 100·(1 − method/baseline).
pub fn delta_rmse(method_rmse: f64, baseline_rmse: f64) -> Result<f64, StatsError> {
    if baseline_rmse <= 0.0 || !baseline_rmse.is_finite() {
        return Err(StatsError::UndefinedEffect(format!("baseline RMSE {baseline_rmse}")));
    }
    Ok(100.0 * (1.0 - method_rmse / baseline_rmse))
}

/// Absolute errors of a method and the baseline, aligned on (sample, run).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedErrors {
    pub keys: Vec<(String, u32)>,
    pub method: Vec<f64>,
    pub baseline: Vec<f64>,
}

impl PairedErrors {
    /// Joins residuals of one property. Every (sample, run) must appear
    /// exactly once on each side.
    pub fn pair(
        method: &[ResidualRecord],
        baseline: &[ResidualRecord],
        property: Property,
    ) -> Result<PairedErrors, StatsError> {
        let index = |rs: &[ResidualRecord], side: &str| -> Result<BTreeMap<(String, u32), f64>, StatsError> {
            let mut m = BTreeMap::new();
            for r in rs.iter().filter(|r| r.property == property) {
                if m.insert((r.sample.clone(), r.run), r.abs_error).is_some() {
                    return Err(StatsError::Pairing(format!(
                        "{side}: ({}, run {}) appears twice for {property}",
                        r.sample, r.run
                    )));
                }
            }
            Ok(m)
        };
        let a = index(method, "method")?;
        let b = index(baseline, "baseline")?;
        if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
            let missing: Vec<_> = a
                .keys()
                .filter(|k| !b.contains_key(*k))
                .chain(b.keys().filter(|k| !a.contains_key(*k)))
                .take(3)
                .collect();
            return Err(StatsError::Pairing(format!(
                "{property}: {} method vs {} baseline pairs; unmatched e.g. {missing:?}",
                a.len(),
                b.len()
            )));
        }
        if a.is_empty() {
            return Err(StatsError::Pairing(format!("{property}: no pairs")));
        }
        Ok(PairedErrors {
            keys: a.keys().cloned().collect(),
            method: a.values().copied().collect(),
            baseline: b.values().copied().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// |e_m| − |e_baseline| per pair.
    pub fn differences(&self) -> Vec<f64> {
        self.method.iter().zip(&self.baseline).map(|(m, b)| m - b).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapCi {
    pub low: f64,
    pub high: f64,
    pub median: f64,
    pub replicates: usize,
    /// Replicates dropped because the resampled baseline RMSE was zero.
    pub skipped: usize,
    pub seed: u64,
}

fn replicate_delta(pairs: &PairedErrors, rng: &mut ChaCha8Rng) -> Option<f64> {
    let n = pairs.len();
    let (mut sm, mut sb) = (0.0, 0.0);
    for _ in 0..n {
        let j = rng.random_range(0..n);
        sm += pairs.method[j] * pairs.method[j];
        sb += pairs.baseline[j] * pairs.baseline[j];
    }
    if sb == 0.0 {
        return None;
    }
    // Both RMSEs share the divisor n, so the ratio of the sums suffices.
    Some(100.0 * (1.0 - (sm / sb).sqrt()))
}

/// Percentile 2.5/97.5 interval of ΔRMSE over resampled (sample, run)
/// pairs. Each replicate draws from its own seed-derived generator.
pub fn paired_bootstrap_ci(pairs: &PairedErrors, replicates: usize, seed: u64) -> Result<BootstrapCi, StatsError> {
    if pairs.is_empty() || pairs.method.len() != pairs.baseline.len() {
        return Err(StatsError::Pairing("empty or ragged paired table".into()));
    }
    if replicates == 0 {
        return Err(StatsError::Parameter("zero bootstrap replicates".into()));
    }
    let draws: Vec<Option<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(b)));
            replicate_delta(pairs, &mut rng)
        })
        .collect();
    let mut values: Vec<f64> = draws.iter().flatten().copied().collect();
    let skipped = replicates - values.len();
    if values.is_empty() {
        return Err(StatsError::UndefinedEffect("baseline errors are all zero".into()));
    }
    values.sort_by(f64::total_cmp);
    Ok(BootstrapCi {
        low: quantile_type7(&values, 0.025),
        high: quantile_type7(&values, 0.975),
        median: quantile_type7(&values, 0.5),
        replicates,
        skipped,
        seed,
    })
}
