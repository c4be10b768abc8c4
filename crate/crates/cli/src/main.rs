use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

use output::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "kvred",
    version,
    about = "Build Khot-Vishnoi games, bound their values and reduce their question count"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the Khot-Vishnoi Bell tensor for `--n` bits and noise `--eps`.
    BuildKv(BuildKvArgs),
    /// Classical and maximally entangled values of a tensor file.
    Values(ValuesArgs),
    /// Run the reduction pipeline and write its report.
    Reduce(ReduceArgs),
    /// Check a file written by another command, or run the built-in invariant checks.
    Verify(VerifyArgs),
    /// Time the Walsh-Hadamard transform on a cube of dimension `--n`.
    BenchFwht(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClassicalChoice {
    Brute,
    Heuristic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum QuantumChoice {
    Me,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every randomized step; echoed into reports.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker thread cap. Results do not depend on it.
    #[arg(long, env = "KVRED_THREADS")]
    pub threads: Option<usize>,
    /// Output path; standard output when absent.
    #[arg(short = 'o', long = "out")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Record wall-clock times in reports.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Args, Debug)]
pub struct BuildKvArgs {
    #[arg(long)]
    pub n: u32,
    /// Noise parameter; defaults to 1/ln(max(n, 3)).
    #[arg(long)]
    pub eps: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct ValuesArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ClassicalChoice::Brute)]
    pub classical: ClassicalChoice,
    #[arg(long, value_enum)]
    pub quantum: Option<QuantumChoice>,
    /// Strategy file for `--quantum me`; inferred for Khot-Vishnoi shaped tensors.
    #[arg(long)]
    pub strategy: Option<PathBuf>,
    /// Cap on deterministic strategy pairs for brute force.
    #[arg(long, default_value_t = kvred::values::DEFAULT_CLASSICAL_BUDGET)]
    pub budget: u64,
    #[arg(long, default_value_t = 64)]
    pub restarts: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct ReduceArgs {
    #[arg(long)]
    pub n: u32,
    /// Noise parameter; defaults to 1/ln(max(n, 3)).
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "target-eps", default_value_t = 0.5)]
    pub target_eps: f64,
    #[arg(long = "level-d", default_value_t = 1)]
    pub level_d: usize,
    #[arg(long, default_value_t = 4.0)]
    pub c0: f64,
    #[arg(long, default_value_t = 64)]
    pub restarts: usize,
    /// Cap on enumerated points for exact classical values and map norms.
    #[arg(long)]
    pub budget: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// File to check. Without it the built-in invariant checks run at `--n`.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub n: u32,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 20)]
    pub n: u32,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[command(flatten)]
    pub common: Common,
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::BuildKv(a) => &a.common,
        Command::Values(a) => &a.common,
        Command::Reduce(a) => &a.common,
        Command::Verify(a) => &a.common,
        Command::BenchFwht(a) => &a.common,
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = common(&cli.command).threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::BuildKv(a) => commands::build_kv(&a),
        Command::Values(a) => commands::values(&a),
        Command::Reduce(a) => commands::reduce(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::BenchFwht(a) => commands::bench_fwht(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kvred: {e}");
            ExitCode::from(e.code())
        }
    }
}
