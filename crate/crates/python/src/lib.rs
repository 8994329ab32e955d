//! Python bindings.
//!
//! Listings, yield cells and reports cross the boundary as plain dicts in
//! the same shape as the JSONL dataset and the HTTP API.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use rentyield::evaluation::{self, ModelChoice, RunOptions};
use rentyield::{finance, forest, ingest, regression, svr, synth};
use rentyield::{FinancingTerms, ForestConfig, KernelSpec, Listing, ModelSpec, MortgageTerms, SvrConfig, YieldCell};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(err)
}

fn listings_from(obj: &Bound<'_, PyAny>) -> PyResult<Vec<Listing>> {
    let raw: Vec<Listing> = from_py(obj)?;
    raw.into_iter().map(|l| l.validate().map_err(err)).collect()
}

fn terms(tcost: f64, down: f64, rate: f64, term: u32) -> PyResult<FinancingTerms> {
    FinancingTerms::new(tcost, down, rate, term).map_err(err)
}

fn spec(n: u8) -> PyResult<ModelSpec> {
    ModelSpec::from_number(n).map_err(err)
}

// ------------------------------------------------------------ finance

#[pyfunction]
#[pyo3(signature = (price, tcost = 0.067, down = 0.30, rate = 0.0016, term = 360))]
fn monthly_mortgage(price: f64, tcost: f64, down: f64, rate: f64, term: u32) -> PyResult<f64> {
    let t = MortgageTerms::new(price, tcost, down, rate, term).map_err(err)?;
    Ok(finance::monthly_mortgage(&t))
}

#[pyfunction]
#[pyo3(signature = (price, tcost = 0.067, down = 0.30, rate = 0.0016, term = 360))]
fn total_cost(price: f64, tcost: f64, down: f64, rate: f64, term: u32) -> PyResult<f64> {
    let t = MortgageTerms::new(price, tcost, down, rate, term).map_err(err)?;
    Ok(finance::total_cost(&t))
}

/// Month-by-month schedule at the computed payment.
#[pyfunction]
#[pyo3(signature = (price, tcost = 0.067, down = 0.30, rate = 0.0016, term = 360))]
fn amortization_schedule(py: Python<'_>, price: f64, tcost: f64, down: f64, rate: f64, term: u32) -> PyResult<Py<PyAny>> {
    let t = MortgageTerms::new(price, tcost, down, rate, term).map_err(err)?;
    let rows = finance::amortization_schedule(&t, finance::monthly_mortgage(&t)).map_err(err)?;
    to_py(py, &rows)
}

#[pyfunction]
fn size_bucket(size: f64) -> Option<&'static str> {
    finance::size_bucket_of(size).map(|b| b.label())
}

#[pyfunction]
#[pyo3(signature = (listings, tcost = 0.067, down = 0.30, rate = 0.0016, term = 360))]
fn yield_index(py: Python<'_>, listings: &Bound<'_, PyAny>, tcost: f64, down: f64, rate: f64, term: u32) -> PyResult<Py<PyAny>> {
    let cells = finance::compute_yield_index(&listings_from(listings)?, &terms(tcost, down, rate, term)?);
    to_py(py, &cells)
}

/// Mean index per neighborhood over cells returned by `yield_index`.
#[pyfunction]
fn neighborhood_average(py: Python<'_>, cells: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
    let cells: Vec<YieldCell> = from_py(cells)?;
    to_py(py, &finance::neighborhood_average(&cells))
}

// ------------------------------------------------------------- ingest

#[pyfunction]
fn clean_text(text: &str) -> PyResult<Vec<String>> {
    ingest::clean_text(text).map_err(err)
}

#[pyfunction]
fn parse_record(py: Python<'_>, record: &str) -> PyResult<Py<PyAny>> {
    to_py(py, &ingest::parse_record(record).map_err(err)?)
}

#[pyfunction]
fn load_dataset(py: Python<'_>, path: PathBuf) -> PyResult<Py<PyAny>> {
    to_py(py, &ingest::load_dataset(&path).map_err(err)?)
}

#[pyfunction]
fn store_dataset(path: PathBuf, listings: &Bound<'_, PyAny>) -> PyResult<()> {
    ingest::store_dataset(&path, &listings_from(listings)?).map_err(err)
}

/// Deduplicated listings and the number of duplicates dropped.
#[pyfunction]
fn dedupe(py: Python<'_>, listings: &Bound<'_, PyAny>) -> PyResult<(Py<PyAny>, usize)> {
    let (kept, removed) = ingest::dedupe(listings_from(listings)?);
    Ok((to_py(py, &kept)?, removed))
}

#[pyfunction]
#[pyo3(signature = (n_rent = 5000, n_sale = 2000, seed = 2019, outliers = 0.0))]
fn synth_dataset(py: Python<'_>, n_rent: usize, n_sale: usize, seed: u64, outliers: f64) -> PyResult<Py<PyAny>> {
    let cfg = synth::SynthConfig {
        n_rent,
        n_sale,
        seed,
        outlier_fraction: outliers,
    };
    to_py(py, &synth::generate(&cfg))
}

// ------------------------------------------------------------- models

/// Least-squares fit with an intercept, which comes first in
/// `coefficients`. Rows of `x` exclude the intercept.
#[pyclass(frozen)]
struct Ols {
    fit: regression::OlsFit,
}

#[pymethods]
impl Ols {
    #[staticmethod]
    fn fit(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Self> {
        let k = x.first().map_or(0, Vec::len);
        if x.iter().any(|r| r.len() != k) {
            return Err(err("rows of x differ in length"));
        }
        let m = DMatrix::from_fn(x.len(), k + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
        let fit = regression::ols_fit(&m, &DVector::from_vec(y)).map_err(err)?;
        Ok(Ols { fit })
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.fit.coefficients.clone()
    }

    #[getter]
    fn r_squared(&self) -> f64 {
        self.fit.r_squared
    }

    fn summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.fit)
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        x.iter().map(|r| self.fit.predict_features(r).map_err(err)).collect()
    }
}

#[pyclass(frozen)]
struct Forest {
    inner: forest::Forest,
}

#[pymethods]
impl Forest {
    #[staticmethod]
    #[pyo3(signature = (x, y, n_trees = 100, mtry = None, min_leaf = 1, bootstrap = true, seed = 0))]
    fn fit(x: Vec<Vec<f64>>, y: Vec<f64>, n_trees: usize, mtry: Option<usize>, min_leaf: usize, bootstrap: bool, seed: u64) -> PyResult<Self> {
        let cfg = ForestConfig {
            n_trees,
            mtry,
            min_leaf,
            bootstrap,
            seed,
        };
        Ok(Forest {
            inner: forest::forest_fit(&x, &y, &cfg).map_err(err)?,
        })
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.inner.trees.len()
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        forest::forest_predict(&self.inner, &x).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }
}

#[pyclass(frozen)]
struct Svr {
    inner: svr::SvrModel,
}

#[pymethods]
impl Svr {
    /// `gamma`, `degree` and `coef0` override the kernel defaults
    /// (gamma 1/p, degree 3, coef0 0).
    #[staticmethod]
    #[pyo3(signature = (x, y, kernel = "radial", cost = 1.0, epsilon = None, gamma = None, degree = None, coef0 = None, standardize = true))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        kernel: &str,
        cost: f64,
        epsilon: Option<f64>,
        gamma: Option<f64>,
        degree: Option<u32>,
        coef0: Option<f64>,
        standardize: bool,
    ) -> PyResult<Self> {
        let p = x.first().map_or(1, Vec::len);
        let kernel = match KernelSpec::default_for(kernel, p).map_err(err)? {
            KernelSpec::Linear => KernelSpec::Linear,
            KernelSpec::Polynomial { degree: d, gamma: g, coef0: c } => KernelSpec::Polynomial {
                degree: degree.unwrap_or(d),
                gamma: gamma.unwrap_or(g),
                coef0: coef0.unwrap_or(c),
            },
            KernelSpec::Radial { gamma: g } => KernelSpec::Radial { gamma: gamma.unwrap_or(g) },
            KernelSpec::Sigmoid { gamma: g, coef0: c } => KernelSpec::Sigmoid {
                gamma: gamma.unwrap_or(g),
                coef0: coef0.unwrap_or(c),
            },
        };
        let cfg = SvrConfig {
            kernel,
            cost,
            epsilon,
            standardize,
            ..SvrConfig::default()
        };
        Ok(Svr {
            inner: svr::svr_fit(&x, &y, &cfg).map_err(err)?,
        })
    }

    #[getter]
    fn n_support(&self) -> usize {
        self.inner.n_support
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        svr::svr_predict(&self.inner, &x).map_err(err)
    }
}

/// A fitted rent model with its feature spec and provenance, as written by
/// `rentyield train`.
#[pyclass(frozen)]
struct TrainedModel {
    inner: rentyield::model::TrainedModel,
}

#[pymethods]
impl TrainedModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(TrainedModel {
            inner: rentyield::model::TrainedModel::load(&path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(TrainedModel {
            inner: rentyield::model::TrainedModel::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().as_str()
    }

    #[getter]
    fn spec(&self) -> u8 {
        self.inner.spec.number()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names.clone()
    }

    fn predict(&self, listing: &Bound<'_, PyAny>) -> PyResult<f64> {
        let l: Listing = from_py(listing)?;
        self.inner.predict_listing(&l).map_err(err)
    }
}

// ---------------------------------------------------------- evaluation

#[pyfunction]
fn rmse(predicted: Vec<f64>, actual: Vec<f64>) -> PyResult<f64> {
    evaluation::rmse(&predicted, &actual).map_err(err)
}

/// Train and test row indices.
#[pyfunction]
#[pyo3(signature = (n, fraction = 0.7, seed = 0))]
fn train_test_split(n: usize, fraction: f64, seed: u64) -> PyResult<(Vec<usize>, Vec<usize>)> {
    let plan = evaluation::train_test_split(n, fraction, seed).map_err(err)?;
    Ok((plan.train, plan.test))
}

/// Kept and removed listings.
#[pyfunction]
fn zscore_filter(py: Python<'_>, listings: &Bound<'_, PyAny>, z: f64) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
    let out = evaluation::zscore_filter(&listings_from(listings)?, z).map_err(err)?;
    Ok((to_py(py, &out.kept)?, to_py(py, &out.removed)?))
}

/// Fits one model on the rent listings and scores it on a held-out split.
/// Returns the report dict and the trained model.
#[pyfunction]
#[pyo3(signature = (listings, model = "ols", spec = 3, seed = 0, split = 0.7, zscore = None, n_trees = 100, kernel = "radial"))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    listings: &Bound<'_, PyAny>,
    model: &str,
    spec: u8,
    seed: u64,
    split: f64,
    zscore: Option<f64>,
    n_trees: usize,
    kernel: &str,
) -> PyResult<(Py<PyAny>, TrainedModel)> {
    let choice = match model {
        "ols" => ModelChoice::Ols,
        "forest" => ModelChoice::Forest {
            config: ForestConfig {
                n_trees,
                ..ForestConfig::default()
            },
        },
        "svr" => ModelChoice::svr_default(
            kernel,
            SvrConfig {
                standardize: true,
                ..SvrConfig::default()
            },
        )
        .map_err(err)?,
        other => return Err(err(format!("unknown model `{other}`"))),
    };
    let opts = RunOptions {
        seed,
        train_fraction: split,
        zscore,
    };
    let run = evaluation::run_cell(&listings_from(listings)?, self::spec(spec)?, &choice, &opts).map_err(err)?;
    Ok((to_py(py, &run.report)?, TrainedModel { inner: run.model }))
}

/// Sale listings ranked by predicted rent over monthly mortgage.
#[pyfunction]
#[pyo3(signature = (listings, model, tcost = 0.067, down = 0.30, rate = 0.0016, term = 360))]
fn rank_yield(
    py: Python<'_>,
    listings: &Bound<'_, PyAny>,
    model: &TrainedModel,
    tcost: f64,
    down: f64,
    rate: f64,
    term: u32,
) -> PyResult<Py<PyAny>> {
    let r = evaluation::rank_with_model(&listings_from(listings)?, &model.inner, &terms(tcost, down, rate, term)?)
        .map_err(err)?;
    to_py(py, &r)
}

#[pymodule]
fn rentyield_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(monthly_mortgage, m)?)?;
    m.add_function(wrap_pyfunction!(total_cost, m)?)?;
    m.add_function(wrap_pyfunction!(amortization_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(size_bucket, m)?)?;
    m.add_function(wrap_pyfunction!(yield_index, m)?)?;
    m.add_function(wrap_pyfunction!(neighborhood_average, m)?)?;
    m.add_function(wrap_pyfunction!(clean_text, m)?)?;
    m.add_function(wrap_pyfunction!(parse_record, m)?)?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(store_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(dedupe, m)?)?;
    m.add_function(wrap_pyfunction!(synth_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(train_test_split, m)?)?;
    m.add_function(wrap_pyfunction!(zscore_filter, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(rank_yield, m)?)?;
    m.add_class::<Ols>()?;
    m.add_class::<Forest>()?;
    m.add_class::<Svr>()?;
    m.add_class::<TrainedModel>()?;
    Ok(())
}
