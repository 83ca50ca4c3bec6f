use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sdgm_core::diagnostics::Fault;
use sdgm_core::{Form, Kernel};

mod boundary;
mod commands;
mod config;
mod manifest;

/// Sparse discriminative Gaussian mixture classifier.
#[derive(Debug, Parser)]
#[command(name = "sdgm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on a CSV dataset.
    Train(TrainCmd),
    /// Evaluate a saved model on a CSV dataset.
    Eval(EvalCmd),
    /// Train and evaluate on every split in a directory.
    Benchmark(BenchmarkCmd),
    /// Export class posteriors on a 2-D grid, optionally as an SVG plot.
    Boundary(BoundaryCmd),
    /// Sample train/test sets from a Gaussian mixture spec.
    Synth(SynthCmd),
    /// Check analytic derivatives against finite differences.
    Gradcheck(GradcheckCmd),
}

/// Flags that resolve into a training configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    /// Flat JSON config file; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for initialisation (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// `original` (explicit quadratic features) or `dual` (kernel over training samples).
    #[arg(long)]
    pub form: Option<Form>,
    /// Dual-form kernel: `phi` or `poly`.
    #[arg(long)]
    pub kernel: Option<Kernel>,
    /// Initial components per class, one value or one per class (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub components: Option<Vec<usize>>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Debug, Args)]
struct TrainCmd {
    #[command(flatten)]
    flags: TrainFlags,
    /// Training CSV with a header row and the label in the last column.
    #[arg(long, required_unless_present = "dump_config")]
    data: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalCmd {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Directory for metrics.json and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchmarkCmd {
    #[command(flatten)]
    flags: TrainFlags,
    #[arg(long, required_unless_present = "dump_config")]
    splits_dir: Option<PathBuf>,
    /// Use the first N available splits (default: all).
    #[arg(long)]
    n_splits: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BoundaryCmd {
    #[arg(long)]
    model: PathBuf,
    /// Grid resolution, `N` or `NXxNY`.
    #[arg(long, default_value = "100")]
    grid: String,
    /// `x1min,x1max,x2min,x2max`; defaults to the range of --data.
    #[arg(long, allow_hyphen_values = true)]
    bounds: Option<String>,
    /// Samples to overlay and to derive bounds from.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Also write boundary.svg.
    #[arg(long)]
    svg: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthCmd {
    /// Mixture spec JSON (default: the bundled two-ring spec).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 320)]
    n_train: usize,
    #[arg(long, default_value_t = 1600)]
    n_test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GradcheckCmd {
    #[command(flatten)]
    flags: TrainFlags,
    /// At most 200 samples; default is a synthetic two-ring sample of 100.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    n_states: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, hide = true, default_value = "none")]
    inject_fault: FaultArg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FaultArg {
    None,
    SignFlip,
}

impl From<FaultArg> for Fault {
    fn from(f: FaultArg) -> Self {
        match f {
            FaultArg::None => Fault::None,
            FaultArg::SignFlip => Fault::SignFlip,
        }
    }
}

/// How a successful run ended; mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    NotConverged,
    DiagnosticFailed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let argv = &args[1..];
    let result = match cli.command {
        Command::Train(c) => commands::train(argv, &c.flags, c.data.as_deref(), &c.out),
        Command::Eval(c) => commands::eval(argv, &c.model, &c.data, c.out.as_deref()),
        Command::Benchmark(c) => {
            commands::benchmark(argv, &c.flags, c.splits_dir.as_deref(), c.n_splits, &c.out)
        }
        Command::Boundary(c) => commands::boundary(
            argv,
            &c.model,
            &c.grid,
            c.bounds.as_deref(),
            c.data.as_deref(),
            c.svg,
            &c.out,
        ),
        Command::Synth(c) => {
            commands::synth(argv, c.spec.as_deref(), c.n_train, c.n_test, c.seed, &c.out)
        }
        Command::Gradcheck(c) => commands::gradcheck(
            argv,
            &c.flags,
            c.data.as_deref(),
            c.n_states,
            c.out.as_deref(),
            c.inject_fault.into(),
        ),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(2),
        Ok(Outcome::DiagnosticFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
