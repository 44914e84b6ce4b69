//! Batch command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use metricscope_core::dataset::{Cod, Dataset, FeatureVector};
use metricscope_core::fastmap;
use metricscope_core::index::Center;
use metricscope_core::metrics::{validate_axioms, Metric, MetricRegistry, MetricRequest};
use metricscope_core::svg;
use metricscope_core::views;
use metricscope_core::workspace::{Session, DEFAULT_SEED};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ApiError, ApiResult};
use crate::wire::{self, KnnRequest, QueryRequest, RangeRequest};

#[derive(Debug, Parser)]
#[command(name = "metricscope", version, about = "Similarity queries and projections over feature-vector tables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a kNN or range query and write `cod,distance` lines.
    Query(QueryArgs),
    /// Project rows to 3-D and write `cod,x,y,z` lines.
    Project(ProjectArgs),
    /// Render a view of some rows as SVG (or the view model as JSON).
    Views(ViewsArgs),
    /// Check the metric axioms on a sample of rows and print the report.
    ValidateMetric(ValidateArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Replay a saved session and export every live workspace.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Registered metric name.
    #[arg(long, default_value = "euclidean")]
    pub metric: String,
    #[arg(long)]
    pub p: Option<f64>,
    /// Comma-separated weights, one per attribute.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub weights: Option<Vec<f64>>,
}

impl MetricArgs {
    fn request(&self) -> MetricRequest {
        MetricRequest {
            name: self.metric.clone(),
            p: self.p,
            weights: self.weights.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[arg(long, conflicts_with = "center", required_unless_present = "center")]
    pub center_cod: Option<Cod>,
    /// Comma-separated query vector.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long, group = "kind")]
    pub k: Option<usize>,
    /// Neighbours besides the centre.
    #[arg(long, group = "kind")]
    pub neighbors: Option<usize>,
    #[arg(long, group = "kind")]
    pub radius: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// File whose lines start with the CODs to project, in order.
    #[arg(long)]
    pub cods: Option<PathBuf>,
    #[arg(long, env = "METRICSCOPE_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write pivots and stress as JSON.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ViewsArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub cods: Option<PathBuf>,
    /// parallel_coordinates, scatter, table_lens or star.
    #[arg(long)]
    pub technique: String,
    /// Attribute names or indices, comma separated.
    #[arg(long)]
    pub axis_order: Option<String>,
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub y: Option<String>,
    #[arg(long)]
    pub sort: Option<String>,
    #[arg(long)]
    pub direction: Option<String>,
    /// dataset, result_set or explicit.
    #[arg(long)]
    pub norm: Option<String>,
    /// `min:max` pairs for --norm explicit.
    #[arg(long)]
    pub bounds: Option<String>,
    /// svg or json.
    #[arg(long, default_value = "svg")]
    pub format: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Number of rows to check; all pairs and triples of the sample are tested.
    #[arg(long, default_value_t = 50)]
    pub sample: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    #[arg(long, env = "METRICSCOPE_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "METRICSCOPE_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "METRICSCOPE_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, env = "METRICSCOPE_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long, env = "METRICSCOPE_DATA_DIR")]
    pub data_dir: PathBuf,
    /// Receives `<workspace>.result.csv` and `<workspace>.projection.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

fn load(path: &Path) -> ApiResult<Dataset> {
    Dataset::from_path(path).map_err(|e| {
        let mut err = match e {
            metricscope_core::Error::Io(io) => ApiError::bad_request(io.to_string()),
            other => ApiError::from(other),
        };
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

/// CODs from the first field of each non-empty line; `cod` header lines are skipped.
pub fn read_cods(path: &Path) -> ApiResult<Vec<Cod>> {
    let text = std::fs::read_to_string(path).map_err(|e| ApiError::bad_request(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .filter(|(i, l)| !(*i == 0 && l.trim_start().starts_with("cod")))
        .map(|(i, l)| {
            let first = l.split(',').next().unwrap_or("").trim();
            first
                .parse()
                .map_err(|_| ApiError::bad_request(format!("{}: line {}: not a COD: {first:?}", path.display(), i + 1)))
        })
        .collect()
}

fn rows_for(ds: &Dataset, cods: &Option<PathBuf>) -> ApiResult<Vec<FeatureVector>> {
    match cods {
        Some(path) => Ok(ds.select(&read_cods(path)?)?),
        None => Ok(ds.rows().to_vec()),
    }
}

fn write(path: &Path, text: &str) -> ApiResult<()> {
    std::fs::write(path, text).map_err(|e| ApiError::internal(format!("{}: {e}", path.display())))
}

pub fn query(args: &QueryArgs) -> ApiResult<String> {
    let session = Session::new(DEFAULT_SEED);
    let id = session.add_dataset(load(&args.dataset)?);
    let center = match (&args.center_cod, &args.center) {
        (Some(c), _) => Center::Cod(*c),
        (None, Some(v)) => Center::Vector(v.clone()),
        (None, None) => return Err(ApiError::bad_request("one of --center-cod or --center is required")),
    };
    let request = QueryRequest {
        dataset: id,
        metric: args.metric.request(),
        center,
        knn: match (args.k, args.neighbors) {
            (None, None) => None,
            (k, neighbors) => Some(KnnRequest { k, neighbors }),
        },
        range: args.radius.map(|radius| RangeRequest { radius }),
        parent: None,
    };
    let spec = request.to_spec(&session.registry())?;
    let ws = session.run_query(&spec, None)?;
    write(&args.out, &ws.result().to_csv())?;
    Ok(format!("{} entries written to {}", ws.result().len(), args.out.display()))
}

pub fn project(args: &ProjectArgs) -> ApiResult<String> {
    let ds = load(&args.dataset)?;
    let descriptor = MetricRegistry::new().instantiate(&args.metric.request())?;
    let metric = Metric::bind(&descriptor, &ds)?;
    let rows = rows_for(&ds, &args.cods)?;
    let projection = fastmap::project(&rows, &metric, args.seed);
    write(&args.out, &projection.to_csv())?;
    if let Some(path) = &args.sidecar {
        write(path, &serde_json::to_string_pretty(&projection.sidecar()).expect("json value"))?;
    }
    Ok(format!(
        "{} points projected (stress {}) to {}",
        rows.len(),
        projection.stress,
        args.out.display()
    ))
}

pub fn render_view(args: &ViewsArgs) -> ApiResult<String> {
    let ds = load(&args.dataset)?;
    let rows = rows_for(&ds, &args.cods)?;
    let t = wire::technique(&args.technique)?;
    let mut params = std::collections::HashMap::new();
    for (key, value) in [
        ("axis_order", &args.axis_order),
        ("x", &args.x),
        ("y", &args.y),
        ("sort", &args.sort),
        ("direction", &args.direction),
        ("norm", &args.norm),
        ("bounds", &args.bounds),
    ] {
        if let Some(v) = value {
            params.insert(key.to_string(), v.clone());
        }
    }
    let view = views::derive(&ds, &rows, &wire::view_params(&ds, t, &params)?)?;
    let text = match args.format.as_str() {
        "svg" => svg::render(&view),
        "json" => serde_json::to_string_pretty(&view).expect("view model serializes"),
        other => return Err(ApiError::bad_request(format!("unknown format {other:?}"))),
    };
    write(&args.out, &text)?;
    Ok(format!("{} view of {} rows written to {}", t.name(), rows.len(), args.out.display()))
}

pub fn validate_metric(args: &ValidateArgs) -> ApiResult<String> {
    let ds = load(&args.dataset)?;
    let descriptor = MetricRegistry::new().instantiate(&args.metric.request())?;
    let metric = Metric::bind(&descriptor, &ds)?;
    let sample = sample_rows(ds.rows(), args.sample, args.seed);
    let report = validate_axioms(&metric, &sample, args.tolerance)?;
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "metric": descriptor,
        "is_metric": report.is_metric(),
        "is_pseudo_metric": report.is_pseudo_metric(),
        "report": report,
    }))
    .expect("report serializes"))
}

pub fn replay(args: &ReplayArgs) -> ApiResult<String> {
    let session = Session::replay(&args.data_dir)?;
    std::fs::create_dir_all(&args.out).map_err(|e| ApiError::internal(format!("{}: {e}", args.out.display())))?;
    let live = session.workspaces();
    for ws in &live {
        write(&args.out.join(format!("{}.result.csv", ws.id())), &ws.result().to_csv())?;
        write(&args.out.join(format!("{}.projection.csv", ws.id())), &ws.projection().to_csv())?;
    }
    Ok(format!("{} workspaces replayed into {}", live.len(), args.out.display()))
}

pub fn serve(args: &ServeArgs) -> ApiResult<String> {
    let state = crate::http::AppState::open(args.seed, args.data_dir.clone())?;
    let addr = format!("{}:{}", args.host, args.port);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| ApiError::internal(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| ApiError::internal(format!("cannot bind {addr}: {e}")))?;
        tracing::info!(%addr, seed = state.session().seed(), "listening");
        axum::serve(listener, crate::http::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| ApiError::internal(e.to_string()))
    })?;
    Ok("server stopped".into())
}

/// Runs one parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Query(a) => query(a),
        Command::Project(a) => project(a),
        Command::Views(a) => render_view(a),
        Command::ValidateMetric(a) => validate_metric(a),
        Command::Serve(a) => serve(a),
        Command::Replay(a) => replay(a),
    };
    match outcome {
        Ok(message) => {
            let _ = writeln!(std::io::stdout(), "{message}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code.exit_code()
        }
    }
}

/// Seeded sample of `n` rows without replacement, kept in table order.
fn sample_rows(rows: &[FeatureVector], n: usize, seed: u64) -> Vec<FeatureVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, rows.len(), n.min(rows.len())).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| rows[i].clone()).collect()
}
