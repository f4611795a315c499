//! Single-response PLS regression (PLS1, NIPALS with X-deflation) and
//! inner leave-one-out selection of the component count.
//!
//! Targets are centered but never variance-scaled, so predictions come back
//! in physical units. Descriptors are expected to be z-scored by the caller;
//! the model still subtracts its own training mean so that a bootstrap
//! resample or an inner fold is always centered exactly.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::data::DataError;
use crate::standardize::Standardizer;

/// Relative size below which a weight direction is treated as vanishing.
const COMPONENT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum PlsError {
    #[error("component count {k} outside 1..={max}")]
    InvalidComponents { k: usize, max: usize },
    #[error("target has zero variance")]
    DegenerateTarget,
    #[error("component {0} has a vanishing weight vector (rank exhausted)")]
    DegenerateComponent(usize),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no candidate component count survived inner cross-validation")]
    NoViableComponent,
    #[error(transparent)]
    Data(#[from] DataError),
}

/// How the per-component weight vector is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightRule {
    /// w ∝ Xᵀy on the deflated matrices.
    ClosedForm,
    /// Classical NIPALS alternation between X and y scores.
    Iterative { max_iter: usize, tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlsModel {
    pub n_components: usize,
    /// p×k, unit-norm columns.
    pub x_weights: DMatrix<f64>,
    /// p×k.
    pub x_loadings: DMatrix<f64>,
    /// k regression coefficients of y on the scores.
    pub y_loadings: DVector<f64>,
    /// n×k training scores.
    pub x_scores: DMatrix<f64>,
    /// Coefficients acting on centered descriptors.
    pub regression_vector: DVector<f64>,
    pub x_mean: DVector<f64>,
    pub y_mean: f64,
}

pub fn max_components(n_rows: usize, n_cols: usize) -> usize {
    n_cols.min(n_rows.saturating_sub(1))
}

pub fn fit_pls(x: &DMatrix<f64>, y: &DVector<f64>, k: usize) -> Result<PlsModel, PlsError> {
    fit_pls_with(x, y, k, WeightRule::ClosedForm)
}

pub fn fit_pls_with(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    k: usize,
    rule: WeightRule,
) -> Result<PlsModel, PlsError> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(PlsError::Dimension(format!("{n} rows in X, {} targets", y.len())));
    }
    if n < 2 {
        return Err(PlsError::TooFewRows { needed: 2, got: n });
    }
    let max = max_components(n, p);
    if k == 0 || k > max {
        return Err(PlsError::InvalidComponents { k, max });
    }

    let x_mean = DVector::from_iterator(p, x.column_iter().map(|c| c.mean()));
    let y_mean = y.mean();
    let mut xa = x.clone();
    for (j, mut col) in xa.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_mean[j]);
    }
    let mut ya = y.add_scalar(-y_mean);

    let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if ya.norm() <= 1e-12 * y_scale * (n as f64).sqrt() {
        return Err(PlsError::DegenerateTarget);
    }

    let mut weights = DMatrix::zeros(p, k);
    let mut loadings = DMatrix::zeros(p, k);
    let mut scores = DMatrix::zeros(n, k);
    let mut y_loadings = DVector::zeros(k);
    let initial = (xa.transpose() * &ya).norm();

    for a in 0..k {
        let w = weight_vector(&xa, &ya, rule);
        let norm = w.norm();
        if norm <= COMPONENT_TOLERANCE * initial {
            return Err(PlsError::DegenerateComponent(a + 1));
        }
        let w = w / norm;
        let t = &xa * &w;
        let tt = t.dot(&t);
        let load = xa.transpose() * &t / tt;
        let q = ya.dot(&t) / tt;
        xa -= &t * load.transpose();
        ya.axpy(-q, &t, 1.0);

        weights.set_column(a, &w);
        loadings.set_column(a, &load);
        scores.set_column(a, &t);
        y_loadings[a] = q;
    }

    // B = W (PᵀW)⁻¹ q; PᵀW is unit upper triangular for PLS1.
    let ptw = loadings.transpose() * &weights;
    let coef = ptw
        .solve_upper_triangular(&y_loadings)
        .ok_or(PlsError::DegenerateComponent(k))?;
    let regression_vector = &weights * coef;

    Ok(PlsModel {
        n_components: k,
        x_weights: weights,
        x_loadings: loadings,
        y_loadings,
        x_scores: scores,
        regression_vector,
        x_mean,
        y_mean,
    })
}

fn weight_vector(xa: &DMatrix<f64>, ya: &DVector<f64>, rule: WeightRule) -> DVector<f64> {
    match rule {
        WeightRule::ClosedForm => xa.transpose() * ya,
        WeightRule::Iterative { max_iter, tol } => {
            let mut u = ya.clone();
            let mut w = DVector::zeros(xa.ncols());
            for _ in 0..max_iter {
                w = xa.transpose() * &u / u.dot(&u);
                let wn = w.norm();
                if wn == 0.0 {
                    break;
                }
                w /= wn;
                let t = xa * &w;
                let q = ya.dot(&t) / t.dot(&t);
                if q == 0.0 {
                    break;
                }
                let u_next = ya / q;
                let delta = (&u_next - &u).norm();
                u = u_next;
                if delta <= tol * u.norm() {
                    break;
                }
            }
            // Orient like the closed form so both paths agree in sign.
            if w.dot(&(xa.transpose() * ya)) < 0.0 {
                w = -w;
            }
            w * (xa.transpose() * ya).norm()
        }
    }
}

impl PlsModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.x_mean.len(), "dimension mismatch");
        self.y_mean
            + x.iter()
                .zip(self.x_mean.iter())
                .zip(self.regression_vector.iter())
                .map(|((v, m), b)| (v - m) * b)
                .sum::<f64>()
    }

    pub fn predict_matrix(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.nrows(),
            x.row_iter().map(|r| {
                let row: Vec<f64> = r.iter().copied().collect();
                self.predict(&row)
            }),
        )
    }
}

/// Inner fold that did not contribute to one or all candidate counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedInnerFold {
    pub row: usize,
    /// `None` when the fold was unusable for every k (degenerate standardizer).
    pub k: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentSelection {
    pub chosen_k: usize,
    pub inner_rmse_by_k: BTreeMap<usize, f64>,
    pub skipped: Vec<SkippedInnerFold>,
}

/// Leave-one-out selection of the component count over 1..=min(p, n-1).
/// Each inner fold refits its own standardizer on the remaining rows.
pub fn select_components(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<ComponentSelection, PlsError> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(PlsError::Dimension(format!("{n} rows in X, {} targets", y.len())));
    }
    if n < 3 {
        return Err(PlsError::TooFewRows { needed: 3, got: n });
    }
    let max_k = max_components(n, p);
    let mut sq_err: Vec<(f64, usize)> = vec![(0.0, 0); max_k + 1];
    let mut skipped = Vec::new();

    for held in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&i| i != held).collect();
        let x_train = x.select_rows(&keep);
        let y_train = DVector::from_iterator(keep.len(), keep.iter().map(|&i| y[i]));
        let std = match Standardizer::fit(&x_train) {
            Ok(s) => s,
            Err(e) => {
                skipped.push(SkippedInnerFold {
                    row: held,
                    k: None,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let z_train = std.standardize_matrix(&x_train);
        let held_row: Vec<f64> = x.row(held).iter().copied().collect();
        let z_held = std.standardize(&held_row);
        for (k, acc) in sq_err.iter_mut().enumerate().skip(1) {
            match fit_pls(&z_train, &y_train, k) {
                Ok(model) => {
                    let r = model.predict(&z_held) - y[held];
                    acc.0 += r * r;
                    acc.1 += 1;
                }
                Err(e) => skipped.push(SkippedInnerFold {
                    row: held,
                    k: Some(k),
                    reason: e.to_string(),
                }),
            }
        }
    }

    let inner_rmse_by_k: BTreeMap<usize, f64> = (1..=max_k)
        .filter(|&k| sq_err[k].1 > 0)
        .map(|k| (k, (sq_err[k].0 / sq_err[k].1 as f64).sqrt()))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (&k, &rmse) in &inner_rmse_by_k {
        if best.is_none_or(|(_, b)| rmse < b) {
            best = Some((k, rmse));
        }
    }
    let (chosen_k, _) = best.ok_or(PlsError::NoViableComponent)?;
    Ok(ComponentSelection {
        chosen_k,
        inner_rmse_by_k,
        skipped,
    })
}
