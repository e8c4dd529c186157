//! `noninf`: non-inferiority tests for R² and η², power, Bayes factors and
//! the simulation driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use noninf::bayes::BayesError;
use noninf::distributions::DistError;
use noninf::inference::TestError;
use noninf::simulation::{MapError, SimError};

mod commands;
mod input;
mod report;

use report::Format;

#[derive(Parser)]
#[command(name = "noninf", version, about = "Non-inferiority tests for explained variance")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value = "json", global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run NHST and non-inferiority tests with the conditional equivalence decision.
    #[command(subcommand)]
    Test(TestCommand),
    /// Power of the non-inferiority test when the true effect is zero.
    Power(PowerArgs),
    /// Default Bayes factor for a regression against the null model.
    Bf(BfArgs),
    /// Run a simulation config (file path or preset name: sim1, sim2).
    Simulate(SimulateArgs),
    /// Replicate-weighted agreement between the frequentist and Bayes decisions.
    Agree(AgreeArgs),
    /// Decision map over (K, N, R²) and Bayes-factor contours, as CSV.
    Figure1(Figure1Args),
}

#[derive(Subcommand)]
enum TestCommand {
    Regression(RegressionArgs),
    Anova(AnovaArgs),
}

#[derive(Args)]
pub struct RegressionArgs {
    /// CSV file with a header row, or `-` for stdin.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    y: Option<String>,
    /// Covariate columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    x: Vec<String>,
    #[arg(long)]
    r2: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Non-inferiority margin on P². Required.
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Variant {
    Hom,
    Welch,
}

#[derive(Args)]
pub struct AnovaArgs {
    /// Group summaries as "n,mean,sd;n,mean,sd;...".
    #[arg(long)]
    summaries: Option<String>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    y: Option<String>,
    #[arg(long)]
    group: Option<String>,
    /// Non-inferiority margin on η². Required.
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "hom")]
    variant: Variant,
}

#[derive(Args)]
pub struct PowerArgs {
    /// One or more sample sizes, comma separated.
    #[arg(long, required = true, value_delimiter = ',')]
    n: Vec<usize>,
    /// Number of predictors (regression).
    #[arg(long, conflicts_with = "j")]
    k: Option<usize>,
    /// Number of groups (ANOVA).
    #[arg(long)]
    j: Option<usize>,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args)]
pub struct BfArgs {
    #[arg(long)]
    r2: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// medium, wide, ultrawide or a positive number.
    #[arg(long, default_value = "medium")]
    rscale: String,
    #[arg(long, default_value_t = 3.0)]
    threshold: f64,
}

#[derive(Args)]
pub struct SimulateArgs {
    config: PathBuf,
    #[arg(long)]
    replicates: Option<usize>,
    /// Use the config's full replicate count.
    #[arg(long, conflicts_with = "replicates")]
    full: bool,
    #[arg(long, default_value = "noninf-out")]
    out: PathBuf,
    #[arg(long, env = "NONINF_THREADS")]
    threads: Option<usize>,
    /// No per-scenario progress on stderr.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
pub struct AgreeArgs {
    /// results.csv written by `simulate`.
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    threshold: f64,
}

#[derive(Args)]
pub struct Figure1Args {
    #[arg(long, default_value = "figure1")]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,5,12")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 0.10)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 3.0)]
    threshold: f64,
    #[arg(long, default_value = "medium")]
    rscale: String,
}

/// 3 for numerical failures inside the library, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let test_numeric = |e: &TestError| matches!(e, TestError::Dist(_));
    let numeric = err.chain().any(|e| {
        e.downcast_ref::<DistError>().is_some()
            || matches!(e.downcast_ref::<BayesError>(), Some(BayesError::NoConvergence { .. }))
            || e.downcast_ref::<TestError>().is_some_and(test_numeric)
            || matches!(e.downcast_ref::<SimError>(), Some(SimError::Test(t)) if test_numeric(t))
            || match e.downcast_ref::<MapError>() {
                Some(MapError::Test(t)) => test_numeric(t),
                Some(MapError::Bayes(b)) => matches!(b, BayesError::NoConvergence { .. }),
                _ => false,
            }
    });
    if numeric {
        3
    } else {
        2
    }
}

fn run(cli: &Cli) -> anyhow::Result<String> {
    let report = match &cli.command {
        Command::Test(TestCommand::Regression(a)) => commands::test_regression(a)?,
        Command::Test(TestCommand::Anova(a)) => commands::test_anova(a)?,
        Command::Power(a) => commands::power(a)?,
        Command::Bf(a) => commands::bf(a)?,
        Command::Simulate(a) => commands::simulate(a)?,
        Command::Agree(a) => commands::agree(a)?,
        Command::Figure1(a) => commands::figure1(a)?,
    };
    report.render(cli.format)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
