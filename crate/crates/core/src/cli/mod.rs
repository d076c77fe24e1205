//! The `hivae` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::benchmark::{
    evaluate, render_summary, run_benchmark, summarize, synthetic, BenchmarkConfig, BenchmarkError, Method,
};
use crate::imputation::{impute_map, impute_sample, predict_target, ImputationError};
use crate::tabular::{load_dataset, parse_mask, parse_types, write_csv, HeterogeneousTable, MissingMask, TabularError};
use crate::training::{
    load_model, save_model, train_with_observer, EncoderMode, ModelFileError, TrainConfig, TrainError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
            Self::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Data(m) | Self::Numerical(m) => m,
        }
    }
}

impl From<TabularError> for CliError {
    fn from(e: TabularError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(_) => Self::Usage(e.to_string()),
            TrainError::EmptyTable => Self::Data(e.to_string()),
            TrainError::NonFinite { .. } | TrainError::Compute(_) => Self::Numerical(e.to_string()),
        }
    }
}

impl From<ImputationError> for CliError {
    fn from(e: ImputationError) -> Self {
        match e {
            ImputationError::Train(t) => t.into(),
            ImputationError::Compute(_) => Self::Numerical(e.to_string()),
            ImputationError::NotCategorical { .. }
            | ImputationError::NoSuchColumn(_)
            | ImputationError::TrainFraction(_) => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<BenchmarkError> for CliError {
    fn from(e: BenchmarkError) -> Self {
        match e {
            BenchmarkError::Imputation(i) => i.into(),
            BenchmarkError::Fraction(_) | BenchmarkError::UnknownMethod(_) => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "hivae", version, about = "Fit a HI-VAE to mixed-type tabular data and impute missing cells")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a model and write it with a per-epoch ELBO log.
    Train(TrainArgs),
    /// Fill the missing cells of a dataset with a trained model.
    Impute(ImputeArgs),
    /// Score imputed cells against ground truth.
    Evaluate(EvaluateArgs),
    /// Run the missing-rate sweep against the mean/mode baseline.
    Benchmark(BenchmarkArgs),
    /// Predict a held-out categorical column.
    Predict(PredictArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EncoderArg {
    Dropout,
    Factorized,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Latent dimension K.
    #[arg(long, default_value_t = 10)]
    pub dim_z: usize,
    /// Number of mixture components L.
    #[arg(long, default_value_t = 10)]
    pub dim_s: usize,
    /// Width of each attribute's slice of Y.
    #[arg(long, default_value_t = 5)]
    pub dim_y: usize,
    /// Dense layers per network (1 or 2).
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    /// Hidden width when --layers 2.
    #[arg(long, default_value_t = 50)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1000)]
    pub batch: usize,
    #[arg(long, default_value_t = 1.0)]
    pub tau_start: f64,
    #[arg(long, default_value_t = 0.001)]
    pub tau_end: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = EncoderArg::Dropout)]
    pub encoder: EncoderArg,
    /// Disable batch normalization of numeric attributes.
    #[arg(long)]
    pub no_norm: bool,
}

impl ModelArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            dim_z: self.dim_z,
            dim_s: self.dim_s,
            dim_y: self.dim_y,
            layers: self.layers,
            hidden: self.hidden,
            epochs: self.epochs,
            batch_size: self.batch,
            tau_start: self.tau_start,
            tau_end: self.tau_end,
            seed: self.seed,
            encoder: match self.encoder {
                EncoderArg::Dropout => EncoderMode::InputDropout,
                EncoderArg::Factorized => EncoderMode::Factorized,
            },
            normalization: !self.no_norm,
            ..TrainConfig::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub types: PathBuf,
    /// CSV of 1 (observed) / 0 (missing) flags; defaults to empty cells being missing.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Model file; the ELBO log goes to `<out>.log`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ImputeMethod {
    Map,
    Sample,
}

#[derive(Args, Debug)]
pub struct ImputeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub types: PathBuf,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ImputeMethod::Map)]
    pub method: ImputeMethod,
    /// Seed for --method sample; drawn from the OS when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Completed CSV; fill records go to `<out>.fills.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Complete ground-truth CSV.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub imputed: PathBuf,
    #[arg(long)]
    pub types: PathBuf,
    /// Mask used to hide cells: 1 observed, 0 hidden and scored.
    #[arg(long)]
    pub mask: PathBuf,
    /// JSON metrics report.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    #[arg(long, conflicts_with = "synthetic", requires = "types")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub types: Option<PathBuf>,
    /// Use the built-in seven-column correlated dataset.
    #[arg(long, required_unless_present = "data")]
    pub synthetic: bool,
    /// Rows of the synthetic dataset.
    #[arg(long, default_value_t = 1000)]
    pub rows: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5")]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, value_delimiter = ',', default_value = "hivae_map,hivae_sample,mean_mode")]
    pub methods: Vec<String>,
    /// JSON array with one record per method and grid cell.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub types: PathBuf,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Target column, by name or 0-based index.
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn table_csv(table: &HeterogeneousTable, mask: Option<&MissingMask>) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(&mut buf, table, mask).expect("writing to memory");
    buf
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let (table, mask) = load_dataset(&args.data, &args.types, args.mask.as_deref())?;
    let config = args.model.config();
    let mut log = String::from("epoch,tau,elbo\n");
    let result = train_with_observer(&table, &mask, &config, |r| {
        log.push_str(&format!("{},{},{}\n", r.epoch, r.tau, r.elbo));
    });
    write_file(&sidecar(&args.out, ".log"), log.as_bytes())?;
    let state = result?;
    save_model(&state, &args.out).map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
    if let Some(last) = state.log.last() {
        eprintln!("trained {} epochs, final ELBO per row {:.6}", state.log.len(), last.elbo);
    }
    Ok(())
}

fn cmd_impute(args: &ImputeArgs) -> Result<(), CliError> {
    let state = load_model(&args.model)?;
    let (table, mask) = load_dataset(&args.data, &args.types, args.mask.as_deref())?;
    let result = match args.method {
        ImputeMethod::Map => impute_map(&state, &table, &mask)?,
        ImputeMethod::Sample => {
            let seed = args.seed.unwrap_or_else(rand::random);
            eprintln!("seed: {seed}");
            impute_sample(&state, &table, &mask, &mut ChaCha8Rng::seed_from_u64(seed))?
        }
    };
    write_file(&args.out, &table_csv(&result.completed, None))?;
    let mut fills = result.fills_json();
    fills.push('\n');
    write_file(&sidecar(&args.out, ".fills.json"), fills.as_bytes())?;
    eprintln!("filled {} cells", result.fills.len());
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let (truth, truth_observed) = load_dataset(&args.truth, &args.types, None)?;
    let (imputed, imputed_observed) = load_dataset(&args.imputed, &args.types, None)?;
    if imputed.rows() != truth.rows() {
        return Err(CliError::Data(format!("imputed has {} rows, truth has {}", imputed.rows(), truth.rows())));
    }
    let mask = parse_mask(&read_file(&args.mask)?, truth.rows(), truth.cols())?;
    for n in 0..truth.rows() {
        for d in 0..truth.cols() {
            if truth_observed.is_observed(n, d) && !mask.is_observed(n, d) && !imputed_observed.is_observed(n, d) {
                return Err(CliError::Data(format!("imputed cell ({n}, {d}) is empty")));
            }
        }
    }
    let report = evaluate(&truth, &imputed, &truth_observed, &mask, "evaluate", 0.0, 0, 0)?;
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    for c in &report.columns {
        println!("{:<16} {:<12} {:>10.6} ({} cells)", c.name, c.metric.as_str(), c.error, c.cells);
    }
    println!("AvgErr {:.6}", report.avg_err);
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_file(&args.out, text.as_bytes())
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    let methods = args.methods.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>, _>>()?;
    let (table, observed) = match (&args.data, &args.types) {
        (Some(data), Some(types)) => load_dataset(data, types, None)?,
        _ => synthetic::correlated_dataset(args.rows, args.model.seed),
    };
    let config = BenchmarkConfig {
        fractions: args.fractions.clone(),
        repeats: args.repeats,
        methods,
        seed: args.model.seed,
        train: args.model.config(),
    };
    config.train.validate()?;
    let reports = run_benchmark(&table, &observed, &config)?;
    for r in reports.iter().filter_map(|r| r.warning.as_ref().map(|w| (r, w))) {
        eprintln!("warning: {} fraction {} repeat {}: {}", r.0.method, r.0.fraction, r.0.repeat, r.1);
    }
    print!("{}", render_summary(&summarize(&reports)));
    let mut text = serde_json::to_string_pretty(&reports).expect("reports serialize");
    text.push('\n');
    write_file(&args.out, text.as_bytes())
}

fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let schema = parse_types(&read_file(&args.types)?)?;
    let target = schema
        .index_of(&args.target)
        .or_else(|| args.target.parse::<usize>().ok().filter(|&i| i < schema.len()))
        .ok_or_else(|| CliError::Usage(format!("unknown target column `{}`", args.target)))?;
    let (table, mask) = load_dataset(&args.data, &args.types, args.mask.as_deref())?;
    let config = args.model.config();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let report = predict_target(&table, &mask, target, args.train_fraction, &config, &mut rng)?;
    println!("accuracy error {:.6} (majority baseline {:.6})", report.accuracy_error, report.majority_error);
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_file(&args.out, text.as_bytes())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Impute(a) => cmd_impute(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Predict(a) => cmd_predict(a),
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {}", e.message());
            e.exit_code()
        }
    }
}
