//! `cggm`: simulate, preprocess, fit, sweep and evaluate clustered GGMs.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 solver did not
//! converge (results are still written), 4 I/O or parse error.

mod commands;
mod files;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cggm::admm::{AdmmConfig, InnerSolver};
use cggm::cluster::{lambda_grid, Spacing, DEFAULT_FUSION_TOL};
use cggm::preprocess::Step;
use cggm::synthetic::Scenario;
use cggm::CggmError;

#[derive(Debug, Parser)]
#[command(name = "cggm", version, about = "Clustered Gaussian graphical models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a clustered precision matrix and Gaussian samples from it.
    Simulate(SimulateArgs),
    /// Whiten, Gaussianize and/or center a data CSV.
    Preprocess(PreprocessArgs),
    /// Fit at a single lambda.
    Fit(FitArgs),
    /// Fit a warm-started lambda path.
    Path(PathArgs),
    /// Rand index of one or more methods against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Preset sizes and sample count; `--sizes`/`--n` override it.
    #[arg(long)]
    scenario: Option<Scenario>,
    /// Total dimension; must equal the sum of `--sizes` when both are given.
    #[arg(long)]
    p: Option<usize>,
    /// Cluster sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Number of samples.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent replicates; replicate `r` uses seed `seed + r` and is
    /// written to `OUT/rep-XX/`.
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    #[arg(long)]
    input: PathBuf,
    /// Steps to apply; always run in the order whiten, npn, center.
    #[arg(long, value_delimiter = ',', default_value = "whiten,npn,center")]
    steps: Vec<Step>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InnerArg {
    NewtonCg,
    Gradient,
}

/// Fusion weights: `uniform`, `gaussian-knn`, `profile-knn` or `file:PATH`.
#[derive(Debug, Clone, PartialEq)]
enum WeightsArg {
    Uniform,
    GaussianKnn,
    ProfileKnn,
    File(PathBuf),
}

impl std::str::FromStr for WeightsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(WeightsArg::Uniform),
            "gaussian-knn" => Ok(WeightsArg::GaussianKnn),
            "profile-knn" => Ok(WeightsArg::ProfileKnn),
            other => match other.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(WeightsArg::File(PathBuf::from(path))),
                _ => Err(format!(
                    "expected uniform, gaussian-knn, profile-knn or file:PATH, got `{other}`"
                )),
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
struct SolverArgs {
    /// ADMM penalty for the `Q Theta R = Psi` constraints.
    #[arg(long)]
    rho1: Option<f64>,
    /// ADMM penalty for the `D vec(Psi) = delta` constraints.
    #[arg(long)]
    rho2: Option<f64>,
    #[arg(long)]
    tol_abs: Option<f64>,
    #[arg(long)]
    tol_rel: Option<f64>,
    /// Outer ADMM iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, value_enum, default_value_t = InnerArg::NewtonCg)]
    inner_solver: InnerArg,
    #[arg(long, default_value = "uniform")]
    weights: WeightsArg,
    /// Neighbors per variable for the kNN weight schemes.
    #[arg(long, default_value_t = 5)]
    knn: usize,
    /// Kernel bandwidth for the kNN weight schemes.
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    /// Relative tolerance for declaring two columns fused.
    #[arg(long, default_value_t = DEFAULT_FUSION_TOL)]
    fusion_tol: f64,
}

impl SolverArgs {
    fn config(&self, lambda: f64) -> Result<AdmmConfig, CliError> {
        let d = AdmmConfig::default();
        let config = AdmmConfig {
            rho1: self.rho1.unwrap_or(d.rho1),
            rho2: self.rho2.unwrap_or(d.rho2),
            lambda,
            outer_max_iters: self.max_iters.unwrap_or(d.outer_max_iters),
            outer_tol_abs: self.tol_abs.unwrap_or(d.outer_tol_abs),
            outer_tol_rel: self.tol_rel.unwrap_or(d.outer_tol_rel),
            inner_solver: match self.inner_solver {
                InnerArg::NewtonCg => InnerSolver::NewtonCg,
                InnerArg::Gradient => InnerSolver::Gradient,
            },
            ..d
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if !(self.fusion_tol.is_finite() && self.fusion_tol >= 0.0) {
            return Err(CliError::Usage(format!("--fusion-tol must be >= 0, got {}", self.fusion_tol)));
        }
        Ok(config)
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

/// `min:max:count[:log|:linear]`, linear by default.
#[derive(Debug, Clone, PartialEq)]
struct GridSpec {
    min: f64,
    max: f64,
    count: usize,
    spacing: Spacing,
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("expected min:max:count[:log], got `{s}`"));
        }
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number"));
        let count = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("`{}` is not a point count", parts[2]))?;
        let spacing = match parts.get(3).map(|v| v.trim()) {
            None | Some("linear") | Some("lin") => Spacing::Linear,
            Some("log") => Spacing::Log,
            Some(other) => return Err(format!("unknown spacing `{other}`")),
        };
        let spec = GridSpec {
            min: num(parts[0])?,
            max: num(parts[1])?,
            count,
            spacing,
        };
        spec.values().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

impl GridSpec {
    fn values(&self) -> Result<Vec<f64>, CggmError> {
        lambda_grid(self.min, self.max, self.count, self.spacing)
    }
}

#[derive(Debug, Args)]
struct PathArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    grid: GridSpec,
    /// Also report the path point with this many clusters, bisecting
    /// between grid points if needed.
    #[arg(long)]
    select_k: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Cggm,
    Kmeans,
    HcEuclidean,
    HcCorr,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Cggm => "cggm",
            Method::Kmeans => "kmeans",
            Method::HcEuclidean => "hc-euclidean",
            Method::HcCorr => "hc-corr",
        }
    }
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Replicate directories, each holding `data.csv` and `truth.json` as
    /// written by `simulate`.
    replicates: Vec<PathBuf>,
    /// A single data file (with `--truth`) instead of replicate directories.
    #[arg(long, requires = "truth")]
    input: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Score an existing labels file against `--truth` instead of running a
    /// method.
    #[arg(long, requires = "truth", conflicts_with = "input")]
    labels: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "cggm,kmeans,hc-euclidean,hc-corr")]
    method: Vec<Method>,
    /// Path used by `cggm`; the point with the true number of clusters is
    /// scored.
    #[arg(long, default_value = "0.05:50:20:log")]
    grid: GridSpec,
    /// k-means++ restarts.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Seed for k-means; replicate `r` uses `seed + r`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    /// Optional directory for `evaluate.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io { path: PathBuf, source: std::io::Error },
    Parse { path: PathBuf, source: CggmError },
    Core(CggmError),
    NotConverged(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Io { .. } | CliError::Parse { .. } => 4,
            CliError::Core(e) => match e {
                CggmError::InvalidConfig(_)
                | CggmError::InvalidSizes { .. }
                | CggmError::InvalidK { .. }
                | CggmError::PenaltyVacuous(_) => 2,
                CggmError::LineSearchStalled { .. } | CggmError::ResampleExhausted(_) => 3,
                _ => 4,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Parse { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::NotConverged(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<CggmError> for CliError {
    fn from(e: CggmError) -> Self {
        CliError::Core(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(&args),
        Command::Preprocess(args) => commands::preprocess(&args),
        Command::Fit(args) => commands::fit(&args),
        Command::Path(args) => commands::path(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cggm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
