//! Pearson correlation and the descriptor/target correlation matrix.

use serde::Serialize;

use crate::data::{DataError, Dataset};

/// Labels of the matrix rows/columns, in canonical column order.
pub const MATRIX_LABELS: [&str; 7] = ["PD", "CA", "T", "P", "E", "TS", "EL"];

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, DataError> {
    if x.len() != y.len() {
        return Err(DataError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(DataError::TooFewRows {
            needed: 2,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if is_constant(sxx, x) || is_constant(syy, y) {
        return Err(DataError::UndefinedCorrelation("constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

// Sum of squared deviations indistinguishable from rounding noise.
fn is_constant(ss: f64, v: &[f64]) -> bool {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    ss <= (v.len() as f64) * (4.0 * f64::EPSILON * scale).powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[i][j])
    }
}

/// Correlation between all seven numeric columns of the dataset.
pub fn correlation_matrix(ds: &Dataset) -> Result<CorrelationMatrix, DataError> {
    let cols: Vec<Vec<f64>> = (0..MATRIX_LABELS.len()).map(|j| ds.column(j)).collect();
    let k = cols.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in (i + 1)..k {
            let r = pearson(&cols[i], &cols[j])?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        labels: MATRIX_LABELS.iter().map(|s| s.to_string()).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_line() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_series_is_undefined() {
        assert!(matches!(
            pearson(&[0.1, 0.1, 0.1], &[1.0, 2.0, 3.0]),
            Err(DataError::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn matrix_diagonal_and_symmetry() {
        let m = correlation_matrix(&Dataset::canonical()).unwrap();
        for i in 0..7 {
            assert_eq!(m.values[i][i], 1.0);
            for j in 0..7 {
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
    }

    #[test]
    fn quoted_table_coefficients() {
        let m = correlation_matrix(&Dataset::canonical()).unwrap();
        assert!((m.get("P", "E").unwrap() + 0.86).abs() < 0.005);
        assert!((m.get("P", "TS").unwrap() + 0.84).abs() < 0.005);
        assert!((m.get("CA", "EL").unwrap() + 0.57).abs() < 0.005);
        assert!((m.get("PD", "E").unwrap() + 0.35).abs() < 0.005);
        assert!((m.get("E", "EL").unwrap() - 0.748).abs() < 0.0005);
    }

    fn series() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3f64..1e3, 3..20)
    }

    proptest! {
        #[test]
        fn bounded_and_symmetric(x in series(), seed in any::<u64>()) {
            let y: Vec<f64> = x.iter().enumerate()
                .map(|(i, v)| ((seed.wrapping_mul(i as u64 + 1) % 1000) as f64) - v * 0.3)
                .collect();
            if let (Ok(a), Ok(b)) = (pearson(&x, &y), pearson(&y, &x)) {
                prop_assert!(a.abs() <= 1.0);
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn affine_images(x in series(), a in 0.01f64..100.0, b in -100.0f64..100.0) {
            prop_assume!(pearson(&x, &x).is_ok());
            let up: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let down: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
            prop_assert!((pearson(&x, &up).unwrap() - 1.0).abs() < 1e-9);
            prop_assert!((pearson(&x, &down).unwrap() + 1.0).abs() < 1e-9);
        }
    }
}
