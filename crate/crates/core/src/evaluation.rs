//! Experiment harness: train/test splits, RMSE, Z-score outlier filtering,
//! forest grid search, the model suite over all specs, and the implied-yield
//! ranking of sale listings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{
    DomainError, FinancingTerms, ForestConfig, KernelSpec, Listing, ModelSpec, Operation,
    SvrConfig,
};
use crate::features::{encode, encode_listing, EncodeError, EncodedRows};
use crate::finance::monthly_mortgage;
use crate::forest::{forest_fit, ForestError};
use crate::ingest::write_jsonl;
use crate::model::{FittedModel, ModelKind, Provenance, TrainedModel};
use crate::regression::{fit_rows, RegressionError};
use crate::svr::{svr_fit, SvrError};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.70;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("need at least 2 rows to split, got {0}")]
    TooFewRows(usize),
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("z-score threshold must be > 0, got {0}")]
    InvalidThreshold(f64),
    #[error("length mismatch: {predicted} predictions for {actual} targets")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("cannot compute RMSE of an empty sample")]
    EmptySample,
    #[error("grid has no cells")]
    EmptyGrid,
    #[error("no sale listing could be scored")]
    NoScorableListings,
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Svr(#[from] SvrError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Train/test assignment of `n` canonically ordered rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    /// `true` for training rows.
    pub assignment: Vec<bool>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitPlan {
    pub fn n_train(&self) -> usize {
        self.train.len()
    }

    pub fn n_test(&self) -> usize {
        self.test.len()
    }
}

/// `floor(fraction * n)` training rows picked by a seeded shuffle, with at
/// least one row on each side.
pub fn train_test_split(n: usize, fraction: f64, seed: u64) -> Result<SplitPlan, EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::InvalidFraction(fraction));
    }
    if n < 2 {
        return Err(EvalError::TooFewRows(n));
    }
    let n_train = ((fraction * n as f64).floor() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![false; n];
    for &i in &order[..n_train] {
        assignment[i] = true;
    }
    let train = (0..n).filter(|&i| assignment[i]).collect();
    let test = (0..n).filter(|&i| !assignment[i]).collect();
    Ok(SplitPlan {
        seed,
        assignment,
        train,
        test,
    })
}

pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64, EvalError> {
    if predicted.len() != actual.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    if actual.is_empty() {
        return Err(EvalError::EmptySample);
    }
    let sse: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok((sse / actual.len() as f64).sqrt())
}

/// Columns screened by [`zscore_filter`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZColumn {
    Price,
    Size,
}

impl ZColumn {
    fn value(self, l: &Listing) -> f64 {
        match self {
            ZColumn::Price => l.price,
            ZColumn::Size => l.size,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZFilterOutcome {
    pub kept: Vec<Listing>,
    pub removed: Vec<Listing>,
    /// Constant columns; they never remove a row.
    pub zero_variance: Vec<ZColumn>,
}

/// One pass of Z-score elimination on price and size, with mean and
/// population standard deviation taken over the input rows.
pub fn zscore_filter(rows: &[Listing], z: f64) -> Result<ZFilterOutcome, EvalError> {
    if z.is_nan() || z <= 0.0 {
        return Err(EvalError::InvalidThreshold(z));
    }
    let mut stats = Vec::new();
    let mut zero_variance = Vec::new();
    if !rows.is_empty() {
        let n = rows.len() as f64;
        for col in [ZColumn::Price, ZColumn::Size] {
            let mean = rows.iter().map(|l| col.value(l)).sum::<f64>() / n;
            let var = rows
                .iter()
                .map(|l| (col.value(l) - mean).powi(2))
                .sum::<f64>()
                / n;
            if var > 0.0 {
                stats.push((col, mean, var.sqrt()));
            } else {
                zero_variance.push(col);
            }
        }
    }
    let (kept, removed) = rows.iter().cloned().partition(|l| {
        stats
            .iter()
            .all(|&(col, mean, sd)| (col.value(l) - mean).abs() / sd <= z)
    });
    Ok(ZFilterOutcome {
        kept,
        removed,
        zero_variance,
    })
}

/// SHA-256 of the canonical JSONL rendering of a dataset.
pub fn dataset_hash(listings: &[Listing]) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, listings).expect("writing to memory cannot fail");
    Sha256::digest(&buf)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Model family and hyperparameters for one harness cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelChoice {
    Ols,
    /// The forest's seed is replaced by the run seed.
    Forest { config: ForestConfig },
    /// With `auto_gamma`, kernel gamma is set to 1/p for the spec at hand.
    Svr { config: SvrConfig, auto_gamma: bool },
}

impl ModelChoice {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelChoice::Ols => ModelKind::Ols,
            ModelChoice::Forest { .. } => ModelKind::Forest,
            ModelChoice::Svr { .. } => ModelKind::Svr,
        }
    }

    /// SVR with the named kernel at its defaults for each spec.
    pub fn svr_default(kernel: &str, config: SvrConfig) -> Result<Self, DomainError> {
        Ok(ModelChoice::Svr {
            config: SvrConfig {
                kernel: KernelSpec::default_for(kernel, 1)?,
                ..config
            },
            auto_gamma: true,
        })
    }

    /// Short label such as `ols`, `forest` or `svr-radial`.
    pub fn label(&self) -> String {
        match self {
            ModelChoice::Svr { config, .. } => format!("svr-{}", config.kernel.name()),
            other => other.kind().as_str().to_string(),
        }
    }

    /// The concrete choice used for `p` features and the given seed.
    pub fn resolve(&self, p: usize, seed: u64) -> ModelChoice {
        match *self {
            ModelChoice::Ols => ModelChoice::Ols,
            ModelChoice::Forest { config } => ModelChoice::Forest {
                config: ForestConfig { seed, ..config },
            },
            ModelChoice::Svr {
                mut config,
                auto_gamma,
            } => {
                if auto_gamma {
                    let g = 1.0 / p.max(1) as f64;
                    config.kernel = match config.kernel {
                        KernelSpec::Linear => KernelSpec::Linear,
                        KernelSpec::Polynomial { degree, coef0, .. } => KernelSpec::Polynomial {
                            degree,
                            gamma: g,
                            coef0,
                        },
                        KernelSpec::Radial { .. } => KernelSpec::Radial { gamma: g },
                        KernelSpec::Sigmoid { coef0, .. } => KernelSpec::Sigmoid { gamma: g, coef0 },
                    };
                }
                ModelChoice::Svr {
                    config,
                    auto_gamma: false,
                }
            }
        }
    }

    fn hyperparameters(&self) -> Value {
        match self {
            ModelChoice::Ols => json!({}),
            ModelChoice::Forest { config } => json!(config),
            ModelChoice::Svr { config, .. } => json!(config),
        }
    }
}

/// Run settings shared by every harness cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub seed: u64,
    pub train_fraction: f64,
    /// Z-score threshold applied to rent listings before encoding.
    pub zscore: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 0,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            zscore: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    /// Model label, e.g. `svr-polynomial`.
    pub label: String,
    pub spec: ModelSpec,
    /// Resolved hyperparameters; rerunning with these, the seed and the same
    /// dataset reproduces the report.
    pub hyperparameters: Value,
    pub seed: u64,
    pub train_fraction: f64,
    pub zscore: Option<f64>,
    pub dataset_hash: String,
    pub n_train: usize,
    pub n_test: usize,
    pub n_removed: usize,
    pub rmse_test: Option<f64>,
    pub rmse_train: Option<f64>,
    pub runtime_ms: f64,
    /// Set when the cell failed; metrics are then absent.
    pub error: Option<String>,
}

impl EvalReport {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Predicted versus actual rent for one test row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub id: String,
    pub actual: f64,
    pub predicted: f64,
}

/// Outcome of fitting and scoring one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    pub report: EvalReport,
    pub model: TrainedModel,
    pub scatter: Vec<ScatterPoint>,
}

pub fn fit_model(train: &EncodedRows, choice: &ModelChoice) -> Result<FittedModel, EvalError> {
    Ok(match choice {
        ModelChoice::Ols => FittedModel::Ols(fit_rows(train)?),
        ModelChoice::Forest { config } => {
            FittedModel::Forest(forest_fit(&train.features, &train.target, config)?)
        }
        ModelChoice::Svr { config, .. } => {
            FittedModel::Svr(svr_fit(&train.features, &train.target, config)?)
        }
    })
}

fn predict_rows(model: &FittedModel, rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter()
        .map(|r| {
            model
                .predict_features(r)
                .expect("rows share the model's feature layout")
        })
        .collect()
}

/// Rent listings surviving the optional Z-score filter, and the number removed.
fn prepare_rent(listings: &[Listing], zscore: Option<f64>) -> Result<(Vec<Listing>, usize), EvalError> {
    let rent: Vec<Listing> = listings
        .iter()
        .filter(|l| l.operation == Operation::Rent)
        .cloned()
        .collect();
    match zscore {
        Some(z) => {
            let out = zscore_filter(&rent, z)?;
            let removed = out.removed.len();
            Ok((out.kept, removed))
        }
        None => Ok((rent, 0)),
    }
}

fn run_cell_hashed(
    listings: &[Listing],
    hash: &str,
    spec: ModelSpec,
    choice: &ModelChoice,
    opts: &RunOptions,
) -> Result<CellRun, EvalError> {
    let start = Instant::now();
    let (rent, n_removed) = prepare_rent(listings, opts.zscore)?;
    let rows = encode(&rent, spec)?;
    let plan = train_test_split(rows.len(), opts.train_fraction, opts.seed)?;
    let train = rows.subset(&plan.train);
    let test = rows.subset(&plan.test);
    let choice = choice.resolve(spec.n_features(), opts.seed);
    let fitted = fit_model(&train, &choice)?;
    let pred_test = predict_rows(&fitted, &test.features);
    let pred_train = predict_rows(&fitted, &train.features);
    let report = EvalReport {
        model: choice.kind(),
        label: choice.label(),
        spec,
        hyperparameters: choice.hyperparameters(),
        seed: opts.seed,
        train_fraction: opts.train_fraction,
        zscore: opts.zscore,
        dataset_hash: hash.to_string(),
        n_train: train.len(),
        n_test: test.len(),
        n_removed,
        rmse_test: Some(rmse(&pred_test, &test.target)?),
        rmse_train: Some(rmse(&pred_train, &train.target)?),
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        error: None,
    };
    let scatter = test
        .ids
        .iter()
        .zip(test.target.iter().zip(&pred_test))
        .map(|(id, (&actual, &predicted))| ScatterPoint {
            id: id.clone(),
            actual,
            predicted,
        })
        .collect();
    let model = TrainedModel::new(
        spec,
        Provenance {
            dataset_hash: hash.to_string(),
            seed: opts.seed,
            split_fraction: opts.train_fraction,
            zscore: opts.zscore,
            n_train: train.len(),
            n_test: test.len(),
        },
        fitted,
    );
    Ok(CellRun {
        report,
        model,
        scatter,
    })
}

/// Z-score filter, encoding, split, fit and scoring for one model and spec.
pub fn run_cell(
    listings: &[Listing],
    spec: ModelSpec,
    choice: &ModelChoice,
    opts: &RunOptions,
) -> Result<CellRun, EvalError> {
    run_cell_hashed(listings, &dataset_hash(listings), spec, choice, opts)
}

fn failed_report(
    hash: &str,
    spec: ModelSpec,
    choice: &ModelChoice,
    opts: &RunOptions,
    err: &EvalError,
) -> EvalReport {
    let choice = choice.resolve(spec.n_features(), opts.seed);
    EvalReport {
        model: choice.kind(),
        label: choice.label(),
        spec,
        hyperparameters: choice.hyperparameters(),
        seed: opts.seed,
        train_fraction: opts.train_fraction,
        zscore: opts.zscore,
        dataset_hash: hash.to_string(),
        n_train: 0,
        n_test: 0,
        n_removed: 0,
        rmse_test: None,
        rmse_train: None,
        runtime_ms: 0.0,
        error: Some(err.to_string()),
    }
}

fn cell_report(
    listings: &[Listing],
    hash: &str,
    spec: ModelSpec,
    choice: &ModelChoice,
    opts: &RunOptions,
) -> (EvalReport, Vec<ScatterPoint>) {
    match run_cell_hashed(listings, hash, spec, choice, opts) {
        Ok(run) => (run.report, run.scatter),
        Err(e) => (failed_report(hash, spec, choice, opts, &e), Vec::new()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestGrid {
    pub n_trees: Vec<usize>,
    pub mtry: Vec<usize>,
    pub zscore: Vec<f64>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        ForestGrid {
            n_trees: vec![10, 25, 50, 100, 125, 250, 500],
            mtry: (4..=10).collect(),
            zscore: vec![0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0],
        }
    }
}

impl ForestGrid {
    pub fn len(&self) -> usize {
        self.n_trees.len() * self.mtry.len() * self.zscore.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn grid_key(r: &EvalReport) -> (usize, usize, f64) {
    let h = &r.hyperparameters;
    (
        h["n_trees"].as_u64().unwrap_or(0) as usize,
        h["mtry"].as_u64().unwrap_or(0) as usize,
        r.zscore.unwrap_or(f64::INFINITY),
    )
}

/// Ascending test RMSE with failed cells last; equal scores fall back to
/// the hyperparameters so the order never depends on enumeration order.
fn rank_reports(reports: &mut [EvalReport]) {
    reports.sort_by(|a, b| {
        let ra = a.rmse_test.unwrap_or(f64::INFINITY);
        let rb = b.rmse_test.unwrap_or(f64::INFINITY);
        ra.total_cmp(&rb)
            .then_with(|| {
                let (ta, ma, za) = grid_key(a);
                let (tb, mb, zb) = grid_key(b);
                ta.cmp(&tb).then(ma.cmp(&mb)).then(za.total_cmp(&zb))
            })
    });
}

/// Evaluates every (trees, mtry, z) cell, in parallel, and ranks them by
/// test RMSE. Failing cells are kept with their error.
pub fn grid_search_forest(
    listings: &[Listing],
    spec: ModelSpec,
    grid: &ForestGrid,
    base: ForestConfig,
    seed: u64,
    train_fraction: f64,
) -> Result<Vec<EvalReport>, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let hash = dataset_hash(listings);
    let mut cells = Vec::with_capacity(grid.len());
    for &n_trees in &grid.n_trees {
        for &mtry in &grid.mtry {
            for &z in &grid.zscore {
                cells.push((n_trees, mtry, z));
            }
        }
    }
    let mut reports: Vec<EvalReport> = cells
        .into_par_iter()
        .map(|(n_trees, mtry, z)| {
            let choice = ModelChoice::Forest {
                config: ForestConfig {
                    n_trees,
                    mtry: Some(mtry),
                    ..base
                },
            };
            let opts = RunOptions {
                seed,
                train_fraction,
                zscore: Some(z),
            };
            cell_report(listings, &hash, spec, &choice, &opts).0
        })
        .collect();
    rank_reports(&mut reports);
    Ok(reports)
}

/// One cell of the model suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteCell {
    pub report: EvalReport,
    pub scatter: Vec<ScatterPoint>,
}

/// Every model against every spec, each with its own encoding and split.
/// Cells come back model-major, in the order given.
pub fn run_model_suite(
    listings: &[Listing],
    models: &[ModelChoice],
    specs: &[ModelSpec],
    opts: &RunOptions,
) -> Vec<SuiteCell> {
    let hash = dataset_hash(listings);
    let cells: Vec<(ModelChoice, ModelSpec)> = models
        .iter()
        .flat_map(|m| specs.iter().map(move |s| (*m, *s)))
        .collect();
    cells
        .into_par_iter()
        .map(|(choice, spec)| {
            let (report, scatter) = cell_report(listings, &hash, spec, &choice, opts);
            SuiteCell { report, scatter }
        })
        .collect()
}

/// The default suite: OLS, a 100-tree forest and SVR with each kernel.
pub fn default_suite_models() -> Vec<ModelChoice> {
    let svr = SvrConfig {
        standardize: true,
        ..SvrConfig::default()
    };
    let mut models = vec![
        ModelChoice::Ols,
        ModelChoice::Forest {
            config: ForestConfig::default(),
        },
    ];
    for k in ["linear", "polynomial", "radial", "sigmoid"] {
        models.push(ModelChoice::svr_default(k, svr).expect("known kernel"));
    }
    models
}

/// Plain-text RMSE table: one row per model label, one column per spec.
pub fn suite_table(reports: &[EvalReport]) -> String {
    let mut specs: Vec<ModelSpec> = reports.iter().map(|r| r.spec).collect();
    specs.sort();
    specs.dedup();
    let mut labels: Vec<&str> = Vec::new();
    for r in reports {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    let mut cells: BTreeMap<(&str, ModelSpec), &EvalReport> = BTreeMap::new();
    for r in reports {
        cells.insert((&r.label, r.spec), r);
    }
    let mut out = String::from("Test RMSE (euros)\n");
    let _ = write!(out, "{:<18}", "model");
    for s in &specs {
        let _ = write!(out, "{:>12}", format!("Spec {}", s.number()));
    }
    out.push('\n');
    for label in labels {
        let _ = write!(out, "{label:<18}");
        for s in &specs {
            let cell = match cells.get(&(label, *s)).and_then(|r| r.rmse_test) {
                Some(v) => format!("{v:.2}"),
                None if cells.contains_key(&(label, *s)) => "failed".to_string(),
                None => "-".to_string(),
            };
            let _ = write!(out, "{cell:>12}");
        }
        out.push('\n');
    }
    out
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// Reports in long CSV form.
pub fn reports_csv(reports: &[EvalReport]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model",
        "label",
        "spec",
        "hyperparameters",
        "seed",
        "train_fraction",
        "zscore",
        "n_train",
        "n_test",
        "n_removed",
        "rmse_test",
        "rmse_train",
        "runtime_ms",
        "dataset_hash",
        "error",
    ])?;
    for r in reports {
        w.write_record([
            r.model.as_str().to_string(),
            r.label.clone(),
            r.spec.number().to_string(),
            r.hyperparameters.to_string(),
            r.seed.to_string(),
            r.train_fraction.to_string(),
            r.zscore.map(|z| z.to_string()).unwrap_or_default(),
            r.n_train.to_string(),
            r.n_test.to_string(),
            r.n_removed.to_string(),
            opt_num(r.rmse_test),
            opt_num(r.rmse_train),
            format!("{:.1}", r.runtime_ms),
            r.dataset_hash.clone(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn scatter_csv(points: &[ScatterPoint]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "actual", "predicted"])?;
    for p in points {
        w.write_record([p.id.clone(), format!("{:.6}", p.actual), format!("{:.6}", p.predicted)])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// A sale listing scored by a rent model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedListing {
    pub id: String,
    pub neighborhood: String,
    pub price: f64,
    pub predicted_rent: f64,
    pub monthly_mortgage: f64,
    pub implied_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedListing {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldRanking {
    pub ranked: Vec<RankedListing>,
    pub skipped: Vec<SkippedListing>,
}

/// Predicted rent over the monthly mortgage for each sale listing, highest
/// first (ties by id). Listings the model cannot encode are skipped.
pub fn implied_yield_ranking<F>(
    sales: &[Listing],
    predict: F,
    financing: &FinancingTerms,
) -> Result<YieldRanking, EvalError>
where
    F: Fn(&Listing) -> Result<f64, EncodeError>,
{
    let mut ranked = Vec::new();
    let mut skipped = Vec::new();
    for l in sales.iter().filter(|l| l.operation == Operation::Sale) {
        let rent = match predict(l) {
            Ok(v) => v,
            Err(e) => {
                skipped.push(SkippedListing {
                    id: l.id.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let mortgage = monthly_mortgage(&financing.for_price(l.price)?);
        ranked.push(RankedListing {
            id: l.id.clone(),
            neighborhood: l.neighborhood.clone(),
            price: l.price,
            predicted_rent: rent,
            monthly_mortgage: mortgage,
            implied_index: rent / mortgage,
        });
    }
    if ranked.is_empty() {
        return Err(EvalError::NoScorableListings);
    }
    ranked.sort_by(|a, b| {
        b.implied_index
            .total_cmp(&a.implied_index)
            .then_with(|| a.id.cmp(&b.id))
    });
    Ok(YieldRanking { ranked, skipped })
}

/// [`implied_yield_ranking`] driven by a trained model.
pub fn rank_with_model(
    sales: &[Listing],
    model: &TrainedModel,
    financing: &FinancingTerms,
) -> Result<YieldRanking, EvalError> {
    implied_yield_ranking(sales, |l| model.predict_listing(l), financing)
}

/// Encoded feature row for a listing under a trained model's spec.
pub fn features_for(model: &TrainedModel, l: &Listing) -> Result<Vec<f64>, EncodeError> {
    encode_listing(l, model.spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rent(id: &str, price: f64, size: f64) -> Listing {
        let mut l = Listing::new(id, Operation::Rent, price, size, "Centro").unwrap();
        l.exterior = Some(true);
        l.floor = Some(2);
        l
    }

    #[test]
    fn split_counts_and_determinism() {
        let p = train_test_split(10, 0.7, 3).unwrap();
        assert_eq!((p.n_train(), p.n_test()), (7, 3));
        assert_eq!(p, train_test_split(10, 0.7, 3).unwrap());
        let q = train_test_split(2, 0.999, 1).unwrap();
        assert_eq!((q.n_train(), q.n_test()), (1, 1));
        assert_eq!(train_test_split(1, 0.5, 0), Err(EvalError::TooFewRows(1)));
        assert!(train_test_split(5, 1.0, 0).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[3.0, -4.0, 0.0, 0.0], &[0.0; 4]).unwrap(), 2.5);
        assert!((rmse(&[5.5, 7.5], &[1.0, 3.0]).unwrap() - 4.5).abs() < 1e-12);
        assert!(matches!(rmse(&[1.0], &[]), Err(EvalError::LengthMismatch { .. })));
    }

    #[test]
    fn zscore_removes_the_extreme_rent() {
        let mut rows: Vec<Listing> = (0..99)
            .map(|i| rent(&format!("r{i}"), 950.0 + i as f64, 70.0 + (i % 7) as f64))
            .collect();
        rows.push(rent("big", 30_000.0, 72.0));
        let out = zscore_filter(&rows, 1.5).unwrap();
        assert!(out.removed.iter().any(|l| l.id == "big"));
        let all = zscore_filter(&rows, f64::INFINITY).unwrap();
        assert_eq!(all.kept.len(), 100);
    }

    #[test]
    fn zscore_zero_variance_is_noted() {
        let rows: Vec<Listing> = (0..5).map(|i| rent(&format!("r{i}"), 900.0, 60.0)).collect();
        let out = zscore_filter(&rows, 1.0).unwrap();
        assert_eq!(out.kept.len(), 5);
        assert_eq!(out.zero_variance, vec![ZColumn::Price, ZColumn::Size]);
        assert!(zscore_filter(&rows, 0.0).is_err());
    }

    #[test]
    fn ols_on_noiseless_data_has_zero_test_error() {
        let rows: Vec<Listing> = (0..40)
            .map(|i| {
                let size = 40.0 + i as f64;
                let mut l = rent(&format!("r{i:02}"), 0.0 + 100.0 + 10.0 * size, size);
                l.floor = Some(i % 5);
                l.price += 7.0 * f64::from(i % 5);
                l.exterior = Some(i % 3 == 0);
                l
            })
            .collect();
        let run = run_cell(&rows, ModelSpec::Spec1, &ModelChoice::Ols, &RunOptions::default()).unwrap();
        assert!(run.report.rmse_test.unwrap() < 1e-8);
        assert_eq!(run.report.n_train, 28);
        assert_eq!(run.scatter.len(), 12);
    }

    #[test]
    fn cheaper_listing_ranks_higher() {
        let mut a = Listing::new("a", Operation::Sale, 200_000.0, 80.0, "X").unwrap();
        a.exterior = Some(true);
        a.floor = Some(1);
        let mut b = a.clone();
        b.id = "b".into();
        b.price = 150_000.0;
        let fin = FinancingTerms::default();
        let r = implied_yield_ranking(&[a, b], |_| Ok(1000.0), &fin).unwrap();
        assert_eq!(r.ranked[0].id, "b");
        let m = monthly_mortgage(&fin.for_price(150_000.0).unwrap());
        assert!((r.ranked[0].implied_index - 1000.0 / m).abs() < 1e-12);
    }

    #[test]
    fn ranking_skips_and_fails_when_nothing_scores() {
        let a = Listing::new("a", Operation::Sale, 200_000.0, 80.0, "X").unwrap();
        let err = implied_yield_ranking(&[a], |_| Err(EncodeError::MissingFeature("floor")), &FinancingTerms::default());
        assert_eq!(err, Err(EvalError::NoScorableListings));
    }

    #[test]
    fn empty_grid_is_rejected() {
        let grid = ForestGrid {
            n_trees: vec![],
            mtry: vec![1],
            zscore: vec![1.0],
        };
        let err = grid_search_forest(&[], ModelSpec::Spec1, &grid, ForestConfig::default(), 0, 0.7);
        assert_eq!(err, Err(EvalError::EmptyGrid));
    }
}
