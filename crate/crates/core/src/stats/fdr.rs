//! Benjamini–Hochberg step-up adjustment.

use serde::Serialize;

use super::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BhResult {
    /// Adjusted q-values in input order.
    pub q_values: Vec<f64>,
    /// q ≤ level.
    pub reject: Vec<bool>,
    pub level: f64,
}

/// q_(i) = min over j ≥ i of p_(j)·m/j, capped at 1.
pub fn bh_adjust(p: &[f64]) -> Result<Vec<f64>, StatsError> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(StatsError::Parameter(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let mut q = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        let v = p[i] * m as f64 / (rank + 1) as f64;
        running = running.min(v);
        q[i] = running.max(p[i]);
    }
    Ok(q)
}

pub fn bh_fdr(p: &[f64], level: f64) -> Result<BhResult, StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::Parameter(format!("FDR level {level} outside (0, 1)")));
    }
    let q_values = bh_adjust(p)?;
    let reject = q_values.iter().map(|&q| q <= level).collect();
    Ok(BhResult { q_values, reject, level })
}
