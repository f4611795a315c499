//! Shared helpers for integration tests: an independent PLS oracle and
//! fixture locations.
#![allow(dead_code)]

use std::path::PathBuf;

use membench::{Dataset, Property};
use nalgebra::{DMatrix, DVector};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/fixtures/llm_responses")
}

pub fn published_table() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/published_summary.csv")
}

/// Mean and population SD z-scoring fitted on `rows`, applied to `rows`
/// and to `extra`.
fn zscore(rows: &[Vec<f64>], extra: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = rows.len() as f64;
    let p = extra.len();
    let mut mu = vec![0.0; p];
    let mut sd = vec![0.0; p];
    for j in 0..p {
        mu[j] = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        sd[j] = (rows.iter().map(|r| (r[j] - mu[j]).powi(2)).sum::<f64>() / n).sqrt();
    }
    let z = |r: &[f64]| (0..p).map(|j| (r[j] - mu[j]) / sd[j]).collect::<Vec<f64>>();
    (rows.iter().map(|r| z(r)).collect(), z(extra))
}

/// PLS1 prediction by its variational characterisation: least squares of
/// centered y on centered X restricted to the Krylov space
/// span{s, As, ..., A^(k-1)s}, A = XᵀX, s = Xᵀy. At k = p this is ordinary
/// least squares via the normal equations.
pub fn oracle_predict(rows: &[Vec<f64>], y: &[f64], k: usize, target: &[f64]) -> f64 {
    let n = rows.len();
    let p = target.len();
    let mean_x: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j] - mean_x[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - mean_y));
    let a = x.transpose() * &x;
    let s = x.transpose() * &yc;
    let beta = if k == p {
        a.clone().lu().solve(&s).expect("singular normal equations")
    } else {
        // Arnoldi: orthonormal basis of the Krylov space.
        let mut basis: Vec<DVector<f64>> = Vec::new();
        let mut v = s.clone();
        for _ in 0..k {
            for _ in 0..2 {
                for b in &basis {
                    v -= b * b.dot(&v);
                }
            }
            let nv = v.norm();
            basis.push(v / nv);
            v = &a * basis.last().unwrap();
        }
        let vmat = DMatrix::from_columns(&basis);
        let lhs = vmat.transpose() * &a * &vmat;
        let rhs = vmat.transpose() * &s;
        let b = lhs.lu().solve(&rhs).expect("singular reduced system");
        vmat * b
    };
    mean_y + (0..p).map(|j| (target[j] - mean_x[j]) * beta[j]).sum::<f64>()
}

/// Inner leave-one-out selection of k, brute force over every candidate.
pub fn oracle_select(rows: &[Vec<f64>], y: &[f64]) -> usize {
    let n = rows.len();
    let p = rows[0].len();
    let max_k = p.min(n - 1);
    let mut best = (0, f64::INFINITY);
    for k in 1..=max_k {
        let mut sse = 0.0;
        for held in 0..n {
            let train: Vec<Vec<f64>> = (0..n).filter(|&i| i != held).map(|i| rows[i].clone()).collect();
            let ty: Vec<f64> = (0..n).filter(|&i| i != held).map(|i| y[i]).collect();
            let (z, zh) = zscore(&train, &rows[held]);
            let r = oracle_predict(&z, &ty, k, &zh) - y[held];
            sse += r * r;
        }
        let rmse = (sse / n as f64).sqrt();
        if rmse < best.1 {
            best = (k, rmse);
        }
    }
    best.0
}

/// Out-of-fold predictions of the deterministic outer LOOCV, dataset order.
pub fn oracle_loocv(ds: &Dataset, property: Property) -> Vec<(usize, f64)> {
    let samples = ds.samples();
    let n = samples.len();
    (0..n)
        .map(|held| {
            let train: Vec<Vec<f64>> =
                (0..n).filter(|&i| i != held).map(|i| samples[i].descriptors().to_vec()).collect();
            let y: Vec<f64> = (0..n).filter(|&i| i != held).map(|i| samples[i].target(property)).collect();
            let (z, zh) = zscore(&train, &samples[held].descriptors());
            let k = oracle_select(&z, &y);
            (k, oracle_predict(&z, &y, k, &zh))
        })
        .collect()
}
