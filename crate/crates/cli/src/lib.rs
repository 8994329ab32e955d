//! `rentyield` command line and HTTP API.
//!
//! Exit codes: 0 on success, 1 on a domain or I/O error, 2 on a usage error.

pub mod server;

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rentyield::evaluation::{
    default_suite_models, grid_search_forest, rank_with_model, reports_csv, run_cell,
    run_model_suite, scatter_csv, suite_table, ForestGrid, ModelChoice, RunOptions,
};
use rentyield::features::encode;
use rentyield::finance::{compute_yield_index, export_csv, export_geojson, neighborhood_average};
use rentyield::ingest::{
    dataset_stats, impute_price_by_area, ingest, load_dataset, store_dataset, LiveSource,
    PayloadSource, SearchQuery, StatsOptions,
};
use rentyield::model::TrainedModel;
use rentyield::regression::{fit_rows, report_csv, report_text};
use rentyield::synth::{generate, SynthConfig};
use rentyield::{FinancingTerms, ForestConfig, KernelSpec, Listing, ModelSpec, Operation, SvrConfig};
use serde_json::json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rentyield", version, about = "Rental-yield index and rent models for property listings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fetch listing pages (fixtures or live API), clean, parse and store them as JSONL
    Ingest(IngestArgs),
    /// Summary statistics and histograms of a dataset
    Stats(StatsArgs),
    /// Yield index per neighborhood and size bucket
    Index(IndexArgs),
    /// OLS coefficient table for the model specs
    Regress(RegressArgs),
    /// Fit one model and write its artifact
    Train(TrainArgs),
    /// Run the model suite over specs and report test RMSE
    Evaluate(EvaluateArgs),
    /// Forest grid search over trees, mtry and Z-score threshold
    GridSearch(GridArgs),
    /// Rank sale listings by predicted rent over monthly mortgage
    RankYield(RankArgs),
    /// Generate the synthetic benchmark dataset
    Synth(SynthArgs),
    /// Serve the HTTP API
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DatasetArg {
    /// JSONL dataset
    #[arg(long, env = "YF_DATASET")]
    pub dataset: PathBuf,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct FinancingArgs {
    /// Monthly interest rate
    #[arg(long, default_value_t = 0.0016)]
    pub rate: f64,
    /// Loan term in months
    #[arg(long, default_value_t = 360)]
    pub term: u32,
    /// Transaction costs as a fraction of the price
    #[arg(long, default_value_t = 0.067)]
    pub tcost: f64,
    /// Down payment as a fraction of the price
    #[arg(long, default_value_t = 0.30)]
    pub down: f64,
}

impl FinancingArgs {
    pub fn terms(&self) -> Result<FinancingTerms, rentyield::DomainError> {
        FinancingTerms::new(self.tcost, self.down, self.rate, self.term)
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory of fixture pages named `<operation>_p<page>.json`
    #[arg(long, conflicts_with = "live")]
    pub fixtures: Option<PathBuf>,
    /// Query the live API configured by YF_API_BASE and YF_API_TOKEN
    #[arg(long)]
    pub live: bool,
    /// Output JSONL path
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub max_pages: u32,
    /// Leave missing priceByArea values empty
    #[arg(long)]
    pub no_impute: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub data: DatasetArg,
    #[arg(long, default_value_t = 250.0)]
    pub rent_bin: f64,
    #[arg(long, default_value_t = 100_000.0)]
    pub sale_bin: f64,
    #[arg(long, default_value_t = 25.0)]
    pub size_bin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IndexFormat {
    Csv,
    Geojson,
    Json,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[command(flatten)]
    pub data: DatasetArg,
    #[command(flatten)]
    pub financing: FinancingArgs,
    #[arg(long, value_enum, default_value_t = IndexFormat::Csv)]
    pub format: IndexFormat,
    /// Neighborhood boundaries (GeoJSON), required for `--format geojson`
    #[arg(long, env = "YF_BOUNDARIES")]
    pub boundaries: Option<PathBuf>,
    /// Also print the per-neighborhood average index (csv format only)
    #[arg(long)]
    pub averages: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    #[command(flatten)]
    pub data: DatasetArg,
    /// Specs to fit, e.g. `1,2,3,4`
    #[arg(long, value_delimiter = ',', default_values_t = [1u8, 2, 3, 4], value_parser = clap::value_parser!(u8).range(1..=4))]
    pub specs: Vec<u8>,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    pub format: TableFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Ols,
    Forest,
    Svr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Linear,
    Polynomial,
    Radial,
    Sigmoid,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training fraction
    #[arg(long, default_value_t = 0.7)]
    pub split: f64,
    /// Z-score threshold on rent price and size
    #[arg(long)]
    pub zscore: Option<f64>,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            seed: self.seed,
            train_fraction: self.split,
            zscore: self.zscore,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ForestArgs {
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    /// Candidate features per split (default: ceil(p/3))
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_leaf: usize,
    #[arg(long)]
    pub no_bootstrap: bool,
}

impl ForestArgs {
    fn config(&self, seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: self.trees,
            mtry: self.mtry,
            min_leaf: self.min_leaf,
            bootstrap: !self.no_bootstrap,
            seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SvrArgs {
    #[arg(long, value_enum, default_value_t = KernelArg::Radial)]
    pub kernel: KernelArg,
    #[arg(long, default_value_t = 1.0)]
    pub cost: f64,
    /// Tube half-width (default: 0.1 * std of the training rents)
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Kernel gamma (default: 1/p)
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub degree: u32,
    #[arg(long, default_value_t = 0.0)]
    pub coef0: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_iter: usize,
    /// Fit on raw features and rents instead of standardized ones
    #[arg(long)]
    pub raw: bool,
}

impl SvrArgs {
    fn choice(&self) -> Result<ModelChoice, rentyield::DomainError> {
        let g = self.gamma.unwrap_or(1.0);
        let kernel = match self.kernel {
            KernelArg::Linear => KernelSpec::Linear,
            KernelArg::Polynomial => KernelSpec::polynomial(self.degree, g, self.coef0)?,
            KernelArg::Radial => KernelSpec::radial(g)?,
            KernelArg::Sigmoid => KernelSpec::Sigmoid {
                gamma: g,
                coef0: self.coef0,
            },
        };
        let config = SvrConfig {
            kernel,
            cost: self.cost,
            epsilon: self.epsilon,
            tolerance: self.tolerance,
            max_iterations: self.max_iter,
            cache_rows: SvrConfig::default().cache_rows,
            standardize: !self.raw,
        }
        .validate()?;
        Ok(ModelChoice::Svr {
            config,
            auto_gamma: self.gamma.is_none(),
        })
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DatasetArg,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub spec: u8,
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    pub svr: SvrArgs,
    /// Model artifact path
    #[arg(long)]
    pub out: PathBuf,
    /// Test-set predictions as CSV
    #[arg(long)]
    pub scatter: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DatasetArg,
    #[command(flatten)]
    pub run: RunArgs,
    /// Specs to evaluate
    #[arg(long, value_delimiter = ',', default_values_t = [1u8, 2, 3, 4], value_parser = clap::value_parser!(u8).range(1..=4))]
    pub specs: Vec<u8>,
    /// Models: ols, forest, svr-linear, svr-polynomial, svr-radial, svr-sigmoid
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    pub format: TableFormat,
    /// Directory for reports.csv and one scatter CSV per cell
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: DatasetArg,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub spec: u8,
    #[arg(long, value_delimiter = ',')]
    pub trees: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub mtry: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub zscore: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.7)]
    pub split: f64,
    /// Print only the best N cells (text format)
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    pub format: TableFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub data: DatasetArg,
    /// Model artifact written by `train`
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub financing: FinancingArgs,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, value_enum, default_value_t = RankFormat::Csv)]
    pub format: RankFormat,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    pub rent: usize,
    #[arg(long, default_value_t = 2000)]
    pub sale: usize,
    #[arg(long, default_value_t = 2019)]
    pub seed: u64,
    /// Share of rent listings replaced by 30,000-euro outliers
    #[arg(long, default_value_t = 0.0)]
    pub outliers: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub data: DatasetArg,
    #[arg(long, env = "YF_BOUNDARIES")]
    pub boundaries: Option<PathBuf>,
    /// Directory of model artifacts; each file stem becomes a model id
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}

/// A failed command; always maps to exit code 1.
#[derive(Debug)]
pub struct Failure(pub String);

impl<E: Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DOMAIN
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    match cmd {
        Command::Ingest(a) => cmd_ingest(a, out),
        Command::Stats(a) => cmd_stats(a, out),
        Command::Index(a) => cmd_index(a, out),
        Command::Regress(a) => cmd_regress(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::GridSearch(a) => cmd_grid(a, out),
        Command::RankYield(a) => cmd_rank(a, out, err),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Serve(a) => cmd_serve(a, err),
    }
}

fn load(path: &Path) -> Result<Vec<Listing>, Failure> {
    load_dataset(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn spec(n: u8) -> ModelSpec {
    ModelSpec::from_number(n).expect("clap restricts specs to 1..=4")
}

fn write_json(out: &mut dyn Write, value: &impl serde::Serialize) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_ingest(a: IngestArgs, out: &mut dyn Write) -> CmdResult {
    let source = match (&a.fixtures, a.live) {
        (Some(dir), _) => PayloadSource::Fixture(dir.clone()),
        (None, true) => PayloadSource::Live(LiveSource::from_env().ok_or_else(|| {
            Failure("--live needs YF_API_BASE and YF_API_TOKEN in the environment".into())
        })?),
        (None, false) => return Err(Failure("either --fixtures DIR or --live is required".into())),
    };
    let queries = [SearchQuery::new(Operation::Rent), SearchQuery::new(Operation::Sale)];
    let mut outcome = ingest(&queries, &source, a.max_pages)?;
    let imputed = if a.no_impute {
        0
    } else {
        impute_price_by_area(&mut outcome.listings)
    };
    store_dataset(&a.out, &outcome.listings)?;
    writeln!(
        out,
        "pages {} records {} duplicates {} imputed {} stored {} -> {}",
        outcome.pages_read,
        outcome.records_parsed,
        outcome.duplicates_removed,
        imputed,
        outcome.listings.len(),
        a.out.display()
    )?;
    Ok(())
}

fn cmd_stats(a: StatsArgs, out: &mut dyn Write) -> CmdResult {
    let listings = load(&a.data.dataset)?;
    let opts = StatsOptions {
        rent_price_bin: a.rent_bin,
        sale_price_bin: a.sale_bin,
        size_bin: a.size_bin,
    };
    write_json(out, &dataset_stats(&listings, &opts)?)
}

fn cmd_index(a: IndexArgs, out: &mut dyn Write) -> CmdResult {
    let listings = load(&a.data.dataset)?;
    let cells = compute_yield_index(&listings, &a.financing.terms()?);
    match a.format {
        IndexFormat::Csv => {
            out.write_all(&export_csv(&cells)?)?;
            if a.averages {
                writeln!(out)?;
                writeln!(out, "neighborhood,average_index")?;
                for (name, avg) in neighborhood_average(&cells) {
                    writeln!(out, "{name},{avg:.3}")?;
                }
            }
            Ok(())
        }
        IndexFormat::Json => write_json(out, &cells),
        IndexFormat::Geojson => {
            let path = a
                .boundaries
                .ok_or_else(|| Failure("--format geojson needs --boundaries".into()))?;
            let boundaries: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path)?)?;
            write_json(out, &export_geojson(&cells, &boundaries)?)
        }
    }
}

fn cmd_regress(a: RegressArgs, out: &mut dyn Write) -> CmdResult {
    let listings = load(&a.data.dataset)?;
    let fits = a
        .specs
        .iter()
        .map(|&s| Ok(fit_rows(&encode(&listings, spec(s))?)?))
        .collect::<Result<Vec<_>, Failure>>()?;
    match a.format {
        TableFormat::Text => out.write_all(report_text(&fits).as_bytes())?,
        TableFormat::Csv => out.write_all(&report_csv(&fits)?)?,
        TableFormat::Json => write_json(out, &fits)?,
    }
    Ok(())
}

fn train_choice(a: &TrainArgs) -> Result<ModelChoice, Failure> {
    Ok(match a.model {
        ModelArg::Ols => ModelChoice::Ols,
        ModelArg::Forest => ModelChoice::Forest {
            config: a.forest.config(a.run.seed),
        },
        ModelArg::Svr => a.svr.choice()?,
    })
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write) -> CmdResult {
    let listings = load(&a.data.dataset)?;
    let choice = train_choice(&a)?;
    let run = run_cell(&listings, spec(a.spec), &choice, &a.run.options())?;
    run.model.save(&a.out)?;
    if let Some(path) = &a.scatter {
        fs::write(path, scatter_csv(&run.scatter)?)?;
    }
    write_json(out, &run.report)
}

fn suite_models(names: &[String], trees: usize) -> Result<Vec<ModelChoice>, Failure> {
    if names.is_empty() {
        let mut models = default_suite_models();
        for m in &mut models {
            if let ModelChoice::Forest { config } = m {
                config.n_trees = trees;
            }
        }
        return Ok(models);
    }
    let svr = SvrConfig {
        standardize: true,
        ..SvrConfig::default()
    };
    names
        .iter()
        .map(|n| match n.as_str() {
            "ols" => Ok(ModelChoice::Ols),
            "forest" => Ok(ModelChoice::Forest {
                config: ForestConfig {
                    n_trees: trees,
                    ..ForestConfig::default()
                },
            }),
            other => match other.strip_prefix("svr-") {
                Some(k) => Ok(ModelChoice::svr_default(k, svr)?),
                None => Err(Failure(format!("unknown model `{other}`"))),
            },
        })
        .collect()
}

fn cmd_evaluate(a: EvaluateArgs, out: &mut dyn Write) -> CmdResult {
    let listings = load(&a.data.dataset)?;
    let models = suite_models(&a.models, a.trees)?;
    let specs: Vec<ModelSpec> = a.specs.iter().map(|&s| spec(s)).collect();
    let cells = run_model_suite(&listings, &models, &specs, &a.run.options());
    let reports: Vec<_> = cells.iter().map(|c| c.report.clone()).collect();
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("reports.csv"), reports_csv(&reports)?)?;
        for c in &cells {
            let name = format!("scatter_{}_spec{}.csv", c.report.label, c.report.spec.number());
            fs::write(dir.join(name), scatter_csv(&c.scatter)?)?;
        }
    }
    match a.format {
        TableFormat::Text => out.write_all(suite_table(&reports).as_bytes())?,
        TableFormat::Csv => out.write_all(&reports_csv(&reports)?)?,
        TableFormat::Json => write_json(out, &reports)?,
    }
    Ok(())
}

fn cmd_grid(a: GridArgs, out: &mut dyn Write) -> CmdResult {
    let listings = load(&a.data.dataset)?;
    let default = ForestGrid::default();
    let pick = |given: &Vec<usize>, fallback: Vec<usize>| if given.is_empty() { fallback } else { given.clone() };
    let grid = ForestGrid {
        n_trees: pick(&a.trees, default.n_trees),
        mtry: pick(&a.mtry, default.mtry),
        zscore: if a.zscore.is_empty() { default.zscore } else { a.zscore.clone() },
    };
    let reports = grid_search_forest(
        &listings,
        spec(a.spec),
        &grid,
        ForestConfig::default(),
        a.seed,
        a.split,
    )?;
    match a.format {
        TableFormat::Text => {
            writeln!(out, "{:>4} {:>6} {:>5} {:>6} {:>12}", "rank", "trees", "mtry", "z", "rmse_test")?;
            let shown = a.top.unwrap_or(reports.len());
            for (i, r) in reports.iter().take(shown).enumerate() {
                let h = &r.hyperparameters;
                let rmse = match (&r.rmse_test, &r.error) {
                    (Some(v), _) => format!("{v:.3}"),
                    (None, Some(e)) => format!("failed: {e}"),
                    (None, None) => "-".into(),
                };
                writeln!(
                    out,
                    "{:>4} {:>6} {:>5} {:>6} {:>12}",
                    i + 1,
                    h["n_trees"],
                    h["mtry"],
                    r.zscore.map(|z| z.to_string()).unwrap_or_default(),
                    rmse
                )?;
            }
        }
        TableFormat::Csv => out.write_all(&reports_csv(&reports)?)?,
        TableFormat::Json => write_json(out, &reports)?,
    }
    Ok(())
}

fn cmd_rank(a: RankArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let listings = load(&a.data.dataset)?;
    let model = TrainedModel::load(&a.model)?;
    let mut ranking = rank_with_model(&listings, &model, &a.financing.terms()?)?;
    if let Some(limit) = a.limit {
        ranking.ranked.truncate(limit);
    }
    match a.format {
        RankFormat::Json => write_json(out, &ranking)?,
        RankFormat::Csv => {
            writeln!(out, "rank,id,neighborhood,price,predicted_rent,monthly_mortgage,implied_index")?;
            for (i, r) in ranking.ranked.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{:.2},{:.2},{:.2},{:.4}",
                    i + 1,
                    r.id,
                    csv_field(&r.neighborhood),
                    r.price,
                    r.predicted_rent,
                    r.monthly_mortgage,
                    r.implied_index
                )?;
            }
            if !ranking.skipped.is_empty() {
                writeln!(err, "skipped {} listings missing model features", ranking.skipped.len())?;
            }
        }
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_synth(a: SynthArgs, out: &mut dyn Write) -> CmdResult {
    if !(0.0..=1.0).contains(&a.outliers) {
        return Err(Failure(format!("--outliers must lie in [0, 1], got {}", a.outliers)));
    }
    let listings = generate(&SynthConfig {
        n_rent: a.rent,
        n_sale: a.sale,
        seed: a.seed,
        outlier_fraction: a.outliers,
    });
    store_dataset(&a.out, &listings)?;
    write_json(out, &json!({ "listings": listings.len(), "path": a.out }))
}

fn cmd_serve(a: ServeArgs, err: &mut dyn Write) -> CmdResult {
    let state = server::ServiceState::load(&a.data.dataset, a.boundaries.as_deref(), a.models.as_deref())?;
    let addr = format!("{}:{}", a.host, a.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr).await?;
        let _ = writeln!(err, "listening on http://{}", listener.local_addr()?);
        axum::serve(listener, server::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })?;
    Ok(())
}
