//! Column-wise z-scoring fitted on training rows only.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{DataError, Descriptor};

/// Columns whose population standard deviation falls below this are rejected.
pub const VARIANCE_EPSILON: f64 = 1e-12;

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

/// Population standard deviation (divisor n) of each column. Two-pass.
pub fn column_stats(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    x.column_iter()
        .map(|col| {
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .unzip()
}

fn column_name(j: usize, p: usize) -> String {
    if p == Descriptor::ALL.len() {
        Descriptor::ALL[j].label().to_string()
    } else {
        format!("column {j}")
    }
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self, DataError> {
        if x.nrows() < 2 {
            return Err(DataError::TooFewRows {
                needed: 2,
                got: x.nrows(),
            });
        }
        let (mu, sigma) = column_stats(x);
        if let Some((j, &s)) = sigma.iter().enumerate().find(|(_, s)| **s < VARIANCE_EPSILON) {
            return Err(DataError::DegenerateVariance {
                column: column_name(j, x.ncols()),
                sigma: s,
            });
        }
        Ok(Standardizer { mu, sigma })
    }

    /// Fits on a slice of descriptor rows.
    pub fn fit_rows(rows: &[[f64; 4]]) -> Result<Self, DataError> {
        Self::fit(&rows_to_matrix(rows))
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "dimension mismatch");
        x.iter()
            .zip(self.mu.iter().zip(&self.sigma))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn standardize_vector(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(self.standardize(x.as_slice()))
    }

    pub fn standardize_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.mu[j], self.sigma[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        out
    }
}

pub fn rows_to_matrix(rows: &[[f64; 4]]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), 4, |i, j| rows[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;

    #[test]
    fn two_point_fit() {
        let std = Standardizer::fit_rows(&[[1.0; 4], [3.0; 4]]).unwrap();
        assert_eq!(std.mu(), &[2.0; 4]);
        assert_eq!(std.sigma(), &[1.0; 4]);
        assert_eq!(std.standardize(&[3.0; 4]), vec![1.0; 4]);
        assert_eq!(std.standardize(std.mu()), vec![0.0; 4]);
    }

    #[test]
    fn repeated_row_is_degenerate() {
        let row = [0.5, 80.0, 0.2, 75.0];
        let err = Standardizer::fit_rows(&[row; 9]).unwrap_err();
        assert!(matches!(err, DataError::DegenerateVariance { ref column, .. } if column == "PD"));
    }

    #[test]
    fn single_row_rejected() {
        assert!(matches!(
            Standardizer::fit_rows(&[[1.0; 4]]),
            Err(DataError::TooFewRows { .. })
        ));
    }

    #[test]
    fn full_table_pd_mean_matches_hand_sum() {
        let ds = Dataset::canonical();
        let rows: Vec<[f64; 4]> = ds.samples().iter().map(|s| s.descriptors()).collect();
        let std = Standardizer::fit_rows(&rows).unwrap();
        // 0.522+0.364+0.569+0.451+0.408+0.336+0.403+0.319+0.842+0.298 = 4.512
        assert!((std.mu()[0] - 0.4512).abs() < 1e-12);
    }

    #[test]
    fn held_out_s9_in_fold_frame() {
        // Training statistics over S1..S8, S10 for PD, computed by hand:
        // sum = 3.670, mean = 0.407777..., population var = sum((x-mean)^2)/9.
        let ds = Dataset::canonical();
        let rows: Vec<[f64; 4]> = ds
            .samples()
            .iter()
            .filter(|s| s.id != "S9")
            .map(|s| s.descriptors())
            .collect();
        let std = Standardizer::fit_rows(&rows).unwrap();
        let pd: [f64; 9] = [0.522, 0.364, 0.569, 0.451, 0.408, 0.336, 0.403, 0.319, 0.298];
        let mean = 3.670 / 9.0;
        let var = pd.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 9.0;
        let z = std.standardize(&ds.get("S9").unwrap().descriptors());
        assert!((z[0] - (0.842 - mean) / var.sqrt()).abs() < 1e-12);
        // Independent spreadsheet value: 4.998014601...
        assert!((z[0] - 4.998_014_601_3).abs() < 1e-9, "{}", z[0]);
    }
}
