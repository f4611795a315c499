//! Python bindings. Structured results come back as plain dicts and lists.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde::Serialize;
use serde_json::Value;

use membench::data::{read_dataset, DataError};
use membench::llm::{render_prompt as render, PromptTemplate};
use membench::stats::{self, PairedErrors};
use membench::{Dataset, Property, RunConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_bound_py_any(py)?,
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_bound_py_any(py)?,
            None => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py)?,
        },
        Value::String(s) => s.into_bound_py_any(py)?,
        Value::Array(a) => {
            let items = a.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn serialize<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &serde_json::to_value(v).map_err(value_err)?)
}

fn dataset(path: Option<&str>) -> PyResult<Dataset> {
    match path {
        None => Ok(Dataset::canonical()),
        Some(p) => membench::load_dataset(p).map_err(|e| match e {
            DataError::Io { .. } => PyIOError::new_err(e.to_string()),
            other => value_err(other),
        }),
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<nalgebra::DMatrix<f64>> {
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(nalgebra::DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

#[pymodule]
mod pymembench {
    use super::*;

    /// Sample rows of a dataset CSV (the bundled table when `path` is None).
    #[pyfunction]
    #[pyo3(signature = (path=None))]
    fn load_dataset(py: Python<'_>, path: Option<&str>) -> PyResult<Py<PyAny>> {
        Ok(serialize(py, &dataset(path)?.samples())?.unbind())
    }

    /// Parses dataset CSV text and returns its sample rows.
    #[pyfunction]
    fn parse_dataset(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
        let ds = read_dataset(text.as_bytes()).map_err(value_err)?;
        Ok(serialize(py, &ds.samples())?.unbind())
    }

    #[pyfunction]
    #[pyo3(signature = (path=None))]
    fn correlation(py: Python<'_>, path: Option<&str>) -> PyResult<Py<PyAny>> {
        let m = membench::correlation_matrix(&dataset(path)?).map_err(value_err)?;
        Ok(serialize(py, &m)?.unbind())
    }

    #[pyfunction]
    fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        membench::pearson(&x, &y).map_err(value_err)
    }

    /// Fits a k-component PLS1 model and predicts `x_new` rows.
    #[pyfunction]
    fn pls_fit_predict(x: Vec<Vec<f64>>, y: Vec<f64>, k: usize, x_new: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let model = membench::fit_pls(&matrix(&x)?, &nalgebra::DVector::from_vec(y), k).map_err(value_err)?;
        Ok(x_new.iter().map(|r| model.predict(r)).collect())
    }

    /// Inner leave-one-out component selection.
    #[pyfunction]
    fn select_components(py: Python<'_>, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Py<PyAny>> {
        let sel = membench::select_components(&matrix(&x)?, &nalgebra::DVector::from_vec(y)).map_err(value_err)?;
        Ok(serialize(py, &sel)?.unbind())
    }

    /// Outer LOOCV PLS branch; returns prediction records.
    #[pyfunction]
    #[pyo3(signature = (seeds=vec![42, 43, 44, 45, 46], bootstrap=true, path=None))]
    fn run_pls(py: Python<'_>, seeds: Vec<u64>, bootstrap: bool, path: Option<&str>) -> PyResult<Py<PyAny>> {
        let ds = dataset(path)?;
        let cfg = RunConfig::new(seeds, bootstrap).map_err(value_err)?;
        let branch = py
            .detach(|| membench::run_pls_branch(&ds, &cfg))
            .map_err(value_err)?;
        Ok(serialize(py, &branch.records)?.unbind())
    }

    /// Closed-book prompt for fold `fold_index` (1-based).
    #[pyfunction]
    #[pyo3(signature = (fold_index, path=None))]
    fn render_prompt(fold_index: usize, path: Option<&str>) -> PyResult<String> {
        let ds = dataset(path)?;
        let folds = membench::make_folds(&ds);
        let fold = folds
            .get(fold_index.wrapping_sub(1))
            .ok_or_else(|| PyValueError::new_err(format!("fold {fold_index} outside 1..={}", folds.len())))?;
        render(&PromptTemplate::default(), fold, &ds).map_err(value_err)
    }

    #[pyfunction]
    fn wilcoxon(py: Python<'_>, diffs: Vec<f64>) -> PyResult<Py<PyAny>> {
        let r = stats::wilcoxon_signed_rank(&diffs).map_err(value_err)?;
        Ok(serialize(py, &r)?.unbind())
    }

    #[pyfunction]
    fn bh_adjust(p: Vec<f64>) -> PyResult<Vec<f64>> {
        stats::bh_adjust(&p).map_err(value_err)
    }

    #[pyfunction]
    fn delta_rmse(method_rmse: f64, baseline_rmse: f64) -> PyResult<f64> {
        stats::delta_rmse(method_rmse, baseline_rmse).map_err(value_err)
    }

    /// Paired percentile bootstrap CI of ΔRMSE from aligned absolute errors.
    #[pyfunction]
    #[pyo3(signature = (method_errors, baseline_errors, replicates=10_000, seed=20_240_601))]
    fn bootstrap_ci(
        py: Python<'_>,
        method_errors: Vec<f64>,
        baseline_errors: Vec<f64>,
        replicates: usize,
        seed: u64,
    ) -> PyResult<Py<PyAny>> {
        if method_errors.len() != baseline_errors.len() {
            return Err(PyValueError::new_err("error vectors differ in length"));
        }
        let pairs = PairedErrors {
            keys: (0..method_errors.len()).map(|i| (i.to_string(), 1)).collect(),
            method: method_errors,
            baseline: baseline_errors,
        };
        let ci = py
            .detach(|| stats::paired_bootstrap_ci(&pairs, replicates, seed))
            .map_err(value_err)?;
        Ok(serialize(py, &ci)?.unbind())
    }

    /// Ranks methods from a summary CSV (method,property,rmse_mean,...).
    #[pyfunction]
    fn rank_summaries(py: Python<'_>, csv_text: &str) -> PyResult<Py<PyAny>> {
        let s = membench::report::read_summary_table(csv_text.as_bytes()).map_err(value_err)?;
        let t = membench::report::rank_models(&s, None).map_err(value_err)?;
        Ok(serialize(py, &t)?.unbind())
    }

    /// Property labels in canonical order.
    #[pyfunction]
    fn properties() -> Vec<&'static str> {
        Property::ALL.iter().map(|p| p.label()).collect()
    }

    /// Runs the command-line interface; returns its exit status.
    #[pyfunction]
    fn cli(args: Vec<String>) -> i32 {
        membench::cli::cli_main(std::iter::once("membench".to_string()).chain(args))
    }
}
