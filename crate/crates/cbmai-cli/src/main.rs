//! `cbmai` command-line interface: solve instances, run identification
//! experiments, sweep budget grids into CSV, and report hardness gaps.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on instance validation
//! failures.

use cbmai::catalog::{self, GeneratorSpec};
use cbmai::hardness;
use cbmai::harness::{self, Algorithm, ExperimentSpec};
use cbmai::model::{self, Instance, TrueOptimum};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cbmai",
    about = "Constrained best mixed arm identification: algorithms, hardness gaps, and Monte Carlo experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the true-mean program of an instance and print the optimum.
    Solve {
        /// Instance JSON file (or a built-in instance name).
        instance: String,
    },
    /// Run one algorithm at one budget and print the result row.
    Run {
        #[command(flatten)]
        common: ExperimentArgs,
        /// Algorithm: sfsr-iv, sfsr-l, or uslp.
        #[arg(long)]
        algo: String,
        /// Sampling budget N.
        #[arg(long)]
        budget: u64,
    },
    /// Run an algorithm/budget grid and write the results CSV.
    Sweep {
        #[command(flatten)]
        common: ExperimentArgs,
        /// Comma-separated algorithms (default: all three).
        #[arg(long, default_value = "sfsr-iv,sfsr-l,uslp")]
        algos: String,
        /// Comma-separated budgets, e.g. 10000,20000,40000.
        #[arg(long)]
        budgets: String,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the hardness gaps of an instance and print them as JSON.
    Gaps {
        #[arg(long)]
        instance: String,
    },
    /// Print the theoretical rate exponents of an instance as JSON.
    Bounds {
        #[arg(long)]
        instance: String,
    },
    /// Materialize a built-in or generated instance to a JSON file.
    Instance {
        /// Built-in name (D1P..D3I, E1, E2) or a generator-spec JSON file.
        source: String,
        /// Output file for the instance JSON.
        #[arg(long)]
        out: PathBuf,
        /// Seed for randomized generators.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Instance JSON file (or a built-in instance name).
    #[arg(long)]
    instance: String,
    /// Trials per (algorithm, budget) cell.
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Base seed; trial t of algorithm with offset o uses seed + o*10^7 + t.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run even if the instance fails the uniqueness assumption.
    #[arg(long)]
    force: bool,
}

enum CliError {
    Usage(String),
    Validation(String),
}

impl CliError {
    fn report(self) -> ExitCode {
        match self {
            CliError::Usage(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(1)
            }
            CliError::Validation(msg) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap handles --help/--version as "errors" with success status
            let code = if err.exit_code() == 0 { 0 } else { 1 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => err.report(),
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Solve { instance } => solve(&instance),
        Command::Run {
            common,
            algo,
            budget,
        } => run(&common, &algo, budget),
        Command::Sweep {
            common,
            algos,
            budgets,
            out,
        } => sweep(&common, &algos, &budgets, &out),
        Command::Gaps { instance } => gaps(&instance),
        Command::Bounds { instance } => bounds(&instance),
        Command::Instance { source, out, seed } => materialize(&source, &out, seed),
    }
}

/// Loads an instance from a JSON file, falling back to the built-in catalog
/// when the argument is not a path to an existing file.
fn load_instance(source: &str) -> Result<Instance, CliError> {
    let instance = if Path::new(source).is_file() {
        let text = std::fs::read_to_string(source)
            .map_err(|e| CliError::Validation(format!("cannot read '{source}': {e}")))?;
        serde_json::from_str::<Instance>(&text)
            .map_err(|e| CliError::Validation(format!("'{source}' is not an instance JSON: {e}")))?
    } else {
        catalog::builtin_instance(source).map_err(|_| {
            CliError::Validation(format!(
                "'{source}' is neither an instance file nor a built-in name {:?}",
                catalog::BUILTIN_NAMES
            ))
        })?
    };
    instance
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(instance)
}

fn solve(source: &str) -> Result<(), CliError> {
    let instance = load_instance(source)?;
    let report = match model::true_optimum(&instance) {
        TrueOptimum::Infeasible => serde_json::json!({
            "instance": instance.name,
            "status": "infeasible",
        }),
        TrueOptimum::Solved {
            basis,
            x,
            value,
            assumption_ok,
        } => serde_json::json!({
            "instance": instance.name,
            "status": "optimal",
            "value": value,
            "support": basis.indices(),
            "x": x,
            "assumption_ok": assumption_ok,
        }),
    };
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}

fn parse_algorithms(text: &str) -> Result<Vec<Algorithm>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            Algorithm::parse(s)
                .ok_or_else(|| CliError::Usage(format!("unknown algorithm '{s}' (expected sfsr-iv, sfsr-l, or uslp)")))
        })
        .collect()
}

fn parse_budgets(text: &str) -> Result<Vec<u64>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| CliError::Usage(format!("bad budget '{s}': {e}")))
        })
        .collect()
}

fn run_spec(
    common: &ExperimentArgs,
    algorithms: Vec<Algorithm>,
    budgets: Vec<u64>,
) -> Result<Vec<harness::CellResult>, CliError> {
    let instance = load_instance(&common.instance)?;
    let spec = ExperimentSpec {
        instance,
        algorithms,
        budgets,
        trials: common.trials,
        base_seed: common.seed,
    };
    harness::run_trials(&spec, common.force).map_err(|e| match e {
        harness::HarnessError::AssumptionFailed(_) => CliError::Validation(e.to_string()),
        harness::HarnessError::InvalidSpec(_) | harness::HarnessError::Algo(_) => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Usage(other.to_string()),
    })
}

fn run(common: &ExperimentArgs, algo: &str, budget: u64) -> Result<(), CliError> {
    let algorithm = Algorithm::parse(algo)
        .ok_or_else(|| CliError::Usage(format!("unknown algorithm '{algo}'")))?;
    let results = run_spec(common, vec![algorithm], vec![budget])?;
    print!("{}", harness::to_csv(&results));
    Ok(())
}

fn sweep(common: &ExperimentArgs, algos: &str, budgets: &str, out: &Path) -> Result<(), CliError> {
    let algorithms = parse_algorithms(algos)?;
    let budgets = parse_budgets(budgets)?;
    let results = run_spec(common, algorithms, budgets)?;
    let csv = harness::to_csv(&results);
    std::fs::write(out, csv)
        .map_err(|e| CliError::Usage(format!("cannot write '{}': {e}", out.display())))?;
    println!("wrote {} result rows to {}", results.len(), out.display());
    Ok(())
}

fn hardness_report(source: &str) -> Result<(Instance, hardness::GapReport), CliError> {
    let instance = load_instance(source)?;
    let report = hardness::gap_report(&instance).map_err(|e| CliError::Validation(e.to_string()))?;
    Ok((instance, report))
}

fn gaps(source: &str) -> Result<(), CliError> {
    let (_, report) = hardness_report(source)?;
    println!("{}", serde_json::to_string_pretty(&report.to_json()).unwrap());
    Ok(())
}

fn bounds(source: &str) -> Result<(), CliError> {
    let (instance, report) = hardness_report(source)?;
    let rates = hardness::rate_bounds(&instance, &report);
    // plain JSON has no infinity literal; mirror the gaps output convention
    let rate = |v: f64| -> serde_json::Value {
        if v.is_finite() {
            serde_json::json!(v)
        } else {
            serde_json::json!("inf")
        }
    };
    let json = serde_json::json!({
        "instance": instance.name,
        "sfsr_exponent_coeff": rate(rates.sfsr_exponent_coeff),
        "lower_bound_rate": rate(rates.lower_bound_rate),
        "uslp_rate": rate(rates.uslp_rate),
        "n_tilde_coeff": report.n_tilde_coeff,
    });
    println!("{}", serde_json::to_string_pretty(&json).unwrap());
    Ok(())
}

fn materialize(source: &str, out: &Path, seed: u64) -> Result<(), CliError> {
    let instance = if Path::new(source).is_file() {
        let text = std::fs::read_to_string(source)
            .map_err(|e| CliError::Validation(format!("cannot read '{source}': {e}")))?;
        let spec: GeneratorSpec = serde_json::from_str(&text).map_err(|e| {
            CliError::Validation(format!("'{source}' is not a generator spec JSON: {e}"))
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        catalog::generate(&spec, &mut rng).map_err(|e| CliError::Validation(e.to_string()))?
    } else {
        catalog::builtin_instance(source).map_err(|e| CliError::Validation(e.to_string()))?
    };
    let json = serde_json::to_string_pretty(&instance).unwrap();
    std::fs::write(out, json)
        .map_err(|e| CliError::Usage(format!("cannot write '{}': {e}", out.display())))?;
    println!("wrote instance '{}' to {}", instance.name, out.display());
    Ok(())
}
