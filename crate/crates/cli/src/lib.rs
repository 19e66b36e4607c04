//! Command-line front end for `multiobs`: single experiments, sweeps over a
//! method × n grid, and the sample-budget calculators.
//!
//! Exit codes: 0 success, 1 runtime failure (every trial failed), 2 usage
//! error. Results are CSV rows with the fixed schema [`CSV_HEADER`].

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use clap::{Args, Parser, Subcommand, ValueEnum};
use multiobs::erm::BASIS_IDS;
use multiobs::evaluation::{summarize, ExperimentSpec, MethodParams, Summary, METHOD_IDS};
use multiobs::losses::LOSS_IDS;
use multiobs::metasample::budget::{
    budget_improved_nonuniform, budget_improved_uniform, budget_naive, budget_theorem4, budget_theorem5, BudgetParams,
};
use multiobs::synthetic::SCENARIO_IDS;
use serde::Deserialize;

pub const CSV_HEADER: &str = "scenario,method,n,trials,failures,median_mse,q25_mse,q75_mse,seed";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<multiobs::Error> for CliError {
    fn from(e: multiobs::Error) -> Self {
        match e {
            multiobs::Error::AllTrialsFailed(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn identifier_help() -> &'static str {
    static TEXT: OnceLock<String> = OnceLock::new();
    TEXT.get_or_init(|| {
        format!(
            "Identifiers:\n  scenarios: {}\n  methods:   {}\n  losses:    {}\n  bases:     {}\n\n\
             Exit codes: 0 success, 1 every trial failed, 2 usage error.\n\
             Seed precedence: --seed, then MULTIOBS_SEED, then 0.",
            SCENARIO_IDS.join(", "),
            METHOD_IDS.join(", "),
            LOSS_IDS.join(", "),
            BASIS_IDS.join(", "),
        )
    })
}

#[derive(Debug, Parser)]
#[command(
    name = "multiobs",
    version,
    about = "Multi-observation ERM experiments and sample budgets"
)]
#[command(after_help = identifier_help())]
pub struct Cli {
    /// Worker threads for trials; defaults to the number of logical processors.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and append its summary row to a CSV file.
    #[command(after_help = identifier_help())]
    Run(RunArgs),
    /// Run every method × n cell of a JSON sweep config and write a complete CSV.
    #[command(after_help = identifier_help())]
    Sweep {
        /// Path to the JSON sweep configuration.
        config: PathBuf,
    },
    /// Print a sample budget (and ε for theorem5).
    Budget(BudgetArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub method: String,
    /// Labeled samples drawn per trial.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub trials: usize,
    #[arg(long, env = "MULTIOBS_SEED", default_value_t = 0)]
    pub seed: u64,
    /// CSV file to append to; the header is written when the file is new or empty.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Constant for naive sampling: ⌊C·√n⌋ representatives.
    #[arg(long = "C")]
    pub c: Option<f64>,
    #[arg(long)]
    pub basis: Option<String>,
    #[arg(long)]
    pub loss: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BudgetKind {
    Naive,
    ImprovedUniform,
    ImprovedNonuniform,
    Theorem4,
    Theorem5,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    #[arg(value_enum)]
    pub kind: BudgetKind,
    /// Number of metasamples.
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    /// Labels per metasample.
    #[arg(long, default_value_t = 2)]
    pub m: u64,
    #[arg(long, default_value_t = 1)]
    pub d: u32,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub epsilon: f64,
    #[arg(long = "C", default_value_t = 1.0, allow_negative_numbers = true)]
    pub c: f64,
    /// Lipschitz constant of the statistic (theorem5 only).
    #[arg(long = "K", default_value_t = 1.0, allow_negative_numbers = true)]
    pub k: f64,
}

/// JSON sweep configuration. `method_params` maps a method id, exactly as
/// written in `methods`, to its parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub scenario: String,
    pub methods: Vec<String>,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub out_path: PathBuf,
    #[serde(default)]
    pub method_params: BTreeMap<String, MethodParams>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.methods.is_empty() {
            return Err(CliError::Usage("methods must be nonempty".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Usage(
                "n_grid must be nonempty and strictly increasing".into(),
            ));
        }
        if let Some(key) = self.method_params.keys().find(|k| !self.methods.contains(k)) {
            return Err(CliError::Usage(format!(
                "method_params key {key:?} is not listed in methods"
            )));
        }
        Ok(())
    }

    /// Cells in output order: sorted by method id, then n.
    pub fn cells(&self) -> Vec<ExperimentSpec> {
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        methods
            .iter()
            .flat_map(|method| {
                self.n_grid.iter().map(move |&n| ExperimentSpec {
                    scenario: self.scenario.clone(),
                    method: method.clone(),
                    n,
                    trials: self.trials,
                    seed: self.seed,
                    method_params: self.method_params.get(method).cloned().unwrap_or_default(),
                })
            })
            .collect()
    }
}

/// One CSV row. Failed cells (`summary == None`) leave the mse fields empty;
/// floats use Rust's shortest round-trip formatting.
pub fn csv_row(spec: &ExperimentSpec, summary: Option<&Summary>, failures: usize) -> String {
    let (median, q25, q75) = match summary {
        Some(s) => (s.median.to_string(), s.q25.to_string(), s.q75.to_string()),
        None => Default::default(),
    };
    format!(
        "{},{},{},{},{},{},{},{},{}",
        spec.scenario, spec.method, spec.n, spec.trials, failures, median, q25, q75, spec.seed
    )
}

/// Resolves and runs `spec`, returning its CSV row and whether any trial succeeded.
fn run_cell(spec: &ExperimentSpec) -> Result<(String, bool), CliError> {
    let experiment = spec.resolve()?;
    let results = experiment.run_trials(true);
    match summarize(&results) {
        Ok(summary) => Ok((csv_row(spec, Some(&summary), summary.failures), true)),
        Err(_) => Ok((csv_row(spec, None, results.len()), false)),
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let spec = ExperimentSpec {
        scenario: args.scenario.clone(),
        method: args.method.clone(),
        n: args.n,
        trials: args.trials,
        seed: args.seed,
        method_params: MethodParams {
            epsilon: args.epsilon,
            c: args.c,
            basis: args.basis.clone(),
            loss: args.loss.clone(),
            ..MethodParams::default()
        },
    };
    let (row, any_success) = run_cell(&spec)?;
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&args.out)
        .map_err(|e| io_error(&args.out, e))?;
    let is_empty = file.metadata().map_err(|e| io_error(&args.out, e))?.len() == 0;
    let mut text = String::new();
    if is_empty {
        text.push_str(CSV_HEADER);
        text.push('\n');
    }
    text.push_str(&row);
    text.push('\n');
    file.write_all(text.as_bytes()).map_err(|e| io_error(&args.out, e))?;
    if any_success {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("all {} trials failed", spec.trials)))
    }
}

pub fn load_sweep_config(path: &Path) -> Result<SweepConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let config: SweepConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

pub fn cmd_sweep(path: &Path) -> Result<(), CliError> {
    let config = load_sweep_config(path)?;
    let cells = config.cells();
    // Validate the whole grid before spending time on any trial.
    for spec in &cells {
        spec.resolve()?;
    }
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    let mut any_success = false;
    for spec in &cells {
        let (row, ok) = run_cell(spec)?;
        any_success |= ok;
        text.push_str(&row);
        text.push('\n');
    }
    std::fs::write(&config.out_path, text).map_err(|e| io_error(&config.out_path, e))?;
    if any_success {
        Ok(())
    } else {
        Err(CliError::Runtime("every cell of the sweep failed".into()))
    }
}

/// The text `budget` prints: the integer budget, plus `epsilon=…` for theorem5.
pub fn budget_output(args: &BudgetArgs) -> Result<String, CliError> {
    let params = BudgetParams {
        n: args.n,
        m: args.m,
        d: args.d,
        delta: args.delta,
        epsilon: args.epsilon,
        c: args.c,
    };
    let text = match args.kind {
        BudgetKind::Naive => budget_naive(&params)?.to_string(),
        BudgetKind::ImprovedUniform => budget_improved_uniform(&params)?.to_string(),
        BudgetKind::ImprovedNonuniform => budget_improved_nonuniform(&params)?.to_string(),
        BudgetKind::Theorem4 => budget_theorem4(&params)?.to_string(),
        BudgetKind::Theorem5 => {
            let (budget, epsilon) = budget_theorem5(&params, args.k)?;
            format!("{budget}\nepsilon={epsilon}")
        }
    };
    Ok(text)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep { config } => cmd_sweep(config),
        Command::Budget(args) => {
            println!("{}", budget_output(args)?);
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if cli.workers == Some(0) {
        eprintln!("error: --workers must be positive");
        return EXIT_USAGE;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(workers) = cli.workers {
        builder = builder.num_threads(workers);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
