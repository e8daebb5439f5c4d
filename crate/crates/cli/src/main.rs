//! `microgrid` command line driver.
//!
//! Exit codes: 0 on success, 2 when the model is infeasible, 3 when a solver
//! does not converge, 1 for any other failure including bad arguments.
//! Log verbosity is read from `MICROGRID_LOG` (`error` .. `trace`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use microgrid_core::ErrorClass;

mod commands;

pub const LOG_ENV: &str = "MICROGRID_LOG";

#[derive(Debug, Parser)]
#[command(name = "microgrid", version, about = "Microgrid planning and day-ahead dispatch")]
struct Cli {
    /// Run configuration (JSON). Supplies the microgrid, costs, budget and
    /// solver settings used when a subcommand does not override them.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a `timestamp,value` station CSV into daily output profiles.
    Ingest(IngestArgs),
    /// Build the daily scenario set or reduce it.
    #[command(subcommand)]
    Scenarios(ScenariosCommand),
    /// Solve one day of operation for fixed capacities.
    Dispatch(DispatchArgs),
    /// Optimal solar, wind and storage capacities over a scenario set.
    Invest(InvestArgs),
    /// Capacities against the worst case of a relative forecast error.
    RobustInvest(RobustArgs),
    /// Run the whole pipeline or summarize an existing report.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SeriesType {
    Solar,
    Wind,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long = "type", value_enum)]
    kind: SeriesType,
    /// Station CSV with header `timestamp,value`.
    #[arg(long)]
    input: PathBuf,
    /// Profile CSV (`day,hour,eta`); stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum ScenariosCommand {
    /// Pair solar and wind profiles day by day into equiprobable scenarios.
    Build {
        #[arg(long)]
        solar: PathBuf,
        #[arg(long)]
        wind: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Keep the `keep` most representative scenarios.
    Reduce {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        keep: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DispatchMode {
    Central,
    Decentralized,
}

#[derive(Debug, Args)]
struct DispatchArgs {
    /// A single scenario, or a scenario set together with `--index`.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Microgrid JSON; the config or built-in microgrid when absent.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Capacities as JSON, either bare or inside an investment solution.
    #[arg(long)]
    capacity: Option<PathBuf>,
    #[arg(long)]
    solar_kw: Option<f64>,
    #[arg(long)]
    wind_kw: Option<f64>,
    #[arg(long)]
    storage_kwh: Option<f64>,
    #[arg(long, value_enum, default_value_t = DispatchMode::Central)]
    mode: DispatchMode,
    /// Hold every user at the preferred profile.
    #[arg(long)]
    no_demand_response: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Iteration trace CSV of the decentralized run.
    #[arg(long, default_value = "trace.csv")]
    trace: PathBuf,
}

#[derive(Debug, Args)]
struct InvestArgs {
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    scenarios: PathBuf,
    /// Unit costs JSON.
    #[arg(long)]
    costs: Option<PathBuf>,
    /// Budget in HKD; `inf` for unlimited.
    #[arg(long, allow_negative_numbers = true)]
    budget: Option<f64>,
    #[arg(long)]
    no_demand_response: bool,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Budget sweep CSV.
    #[arg(long, default_value = "budget_sweep.csv")]
    sweep_csv: PathBuf,
    #[arg(long)]
    no_sweep: bool,
    /// Budgets of the sweep; the config list when absent.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct RobustArgs {
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    scenarios: PathBuf,
    #[arg(long)]
    costs: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    budget: Option<f64>,
    /// Symmetric relative error bound in percent.
    #[arg(long, allow_negative_numbers = true)]
    error_pct: f64,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Error sweep CSV.
    #[arg(long, default_value = "error_sweep.csv")]
    sweep_csv: PathBuf,
    #[arg(long)]
    no_sweep: bool,
    /// Percentages of the sweep; the config list when absent.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Summarize this report instead of running the pipeline.
    #[arg(long)]
    from: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Infeasible => 2,
        ErrorClass::NotConverged => 3,
        ErrorClass::Other => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
