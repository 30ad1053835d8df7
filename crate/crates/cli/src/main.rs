use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aimd_alloc::engine::SweepRow;
use aimd_alloc::game::{equilibrium_welfare, nash_solve, poa};
use aimd_alloc::output::{self, to_json};
use aimd_alloc::{run_simulation_with, sweep, BaselineResult, Error, NashResult, ScenarioConfig};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

const CONFIG_HELP: &str = "\
Scenario file (TOML). Required: `n`, `[utility]`, and `algorithm` for run/sweep.
Defaults:
  name = \"scenario\"        horizon = 10000        seed = 1
  population_seed = seed    price = 0              baseline_bins = 2000
  initial_x = 0 (alpha for qaimd)
  [capacity]  ratio = 0.35  (C = ratio * sum chi, or ratio * sum psi for sigmoids)
  [aimd]      alpha = 1, beta = 0.85, lambda_floor = 0.001, lambda_ceil = 0.999,
              daimd_semantics = \"as-written\", gamma/gamma1/gamma2 = 0.9 / max_i sup u_i'(x)/x
  [game]      penalty_exponent = 1, tol = 1e-8, damping = 0.5, max_iters = 10000
Exit codes: 0 success, 1 parse/validation error, 2 Nash iteration did not converge, 3 I/O error.";

#[derive(Parser)]
#[command(name = "aimd-alloc", version, about = "Simulate distributed AIMD resource allocation", after_long_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation; writes trace.csv and summary.json.
    Run(Common),
    /// Run one simulation per axis value; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        axis: Axis,
    },
    /// Solve the centralised problem; writes baseline.json.
    Baseline(Common),
    /// Solve the competition game; writes nash.json (a PoA table with --axis).
    Nash {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        axis: OptionalAxis,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Do not print results to stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct Axis {
    /// One of L, C_ratio, n, seed.
    #[arg(long)]
    axis: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    values: Vec<f64>,
}

#[derive(Args)]
struct OptionalAxis {
    /// L or n.
    #[arg(long, requires = "values")]
    axis: Option<String>,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Vec<f64>,
}

enum Failure {
    Invalid(String),
    NotConverged,
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load(common: &Common) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(&common.config).map_err(|e| io_err(&common.config, e))?;
    let mut config = ScenarioConfig::from_toml(&text)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| io_err(&path, e))?;
    tmp.persist(&path).map_err(|e| io_err(&path, e.error))?;
    Ok(path)
}

fn report(common: &Common, text: &str) {
    if !common.quiet {
        print!("{text}");
    }
}

fn cmd_run(common: &Common) -> Result<(), Failure> {
    let config = load(common)?;
    let mut csv = String::from(output::TRACE_HEADER);
    csv.push('\n');
    let summary = run_simulation_with(&config, |r| {
        csv.push_str(&output::trace_line(r));
        csv.push('\n');
    })?;
    write_atomic(&common.out_dir, "trace.csv", &csv)?;
    let json = to_json(&summary);
    write_atomic(&common.out_dir, "summary.json", &json)?;
    report(common, &json);
    Ok(())
}

fn cmd_sweep(common: &Common, axis: &Axis) -> Result<(), Failure> {
    let config = load(common)?;
    let rows: Vec<SweepRow> = sweep(&config, &axis.axis, &axis.values)?;
    let csv = output::sweep_csv(&rows);
    write_atomic(&common.out_dir, "sweep.csv", &csv)?;
    report(common, &csv);
    Ok(())
}

#[derive(Serialize)]
struct BaselineReport {
    scenario: String,
    n: usize,
    capacity: f64,
    #[serde(flatten)]
    result: BaselineResult,
}

fn cmd_baseline(common: &Common) -> Result<(), Failure> {
    let config = load(common)?;
    let scenario = config.resolve()?;
    let result = scenario.baseline()?;
    let json = to_json(&BaselineReport {
        scenario: config.name.clone(),
        n: scenario.n(),
        capacity: scenario.capacity,
        result,
    });
    write_atomic(&common.out_dir, "baseline.json", &json)?;
    report(common, &json);
    Ok(())
}

#[derive(Serialize)]
struct NashReport {
    n: usize,
    capacity: f64,
    price: f64,
    welfare_equilibrium: f64,
    welfare_optimal: f64,
    #[serde(flatten)]
    nash: NashResult,
}

fn solve_game(config: &ScenarioConfig) -> Result<NashReport, Failure> {
    let scenario = config.resolve()?;
    let (game, options) = scenario.game()?;
    let mut nash = nash_solve(&game, &options)?;
    let baseline = scenario.baseline()?;
    nash.poa = Some(poa(&game, &nash, &baseline)?);
    Ok(NashReport {
        n: game.players(),
        capacity: game.capacity,
        price: game.price,
        welfare_equilibrium: equilibrium_welfare(&game, &nash)?,
        welfare_optimal: baseline.objective,
        nash,
    })
}

#[derive(Serialize)]
struct NashTable<'a> {
    scenario: &'a str,
    axis: &'a str,
    rows: Vec<NashRow>,
}

#[derive(Serialize)]
struct NashRow {
    value: f64,
    #[serde(flatten)]
    report: NashReport,
}

fn cmd_nash(common: &Common, axis: &OptionalAxis) -> Result<(), Failure> {
    let config = load(common)?;
    let (json, converged) = match &axis.axis {
        None => {
            let report = solve_game(&config)?;
            let converged = report.nash.converged;
            (to_json(&report), converged)
        }
        Some(name) => {
            if name != "L" && name != "n" {
                return Err(Failure::Invalid(format!(
                    "nash sweeps support axes L and n, got `{name}`"
                )));
            }
            let mut rows = Vec::with_capacity(axis.values.len());
            for v in &axis.values {
                let report = solve_game(&config.with_axis(name, *v)?)?;
                rows.push(NashRow { value: *v, report });
            }
            let converged = rows.iter().all(|r| r.report.nash.converged);
            (
                to_json(&NashTable {
                    scenario: &config.name,
                    axis: name,
                    rows,
                }),
                converged,
            )
        }
    };
    write_atomic(&common.out_dir, "nash.json", &json)?;
    report(common, &json);
    if converged {
        Ok(())
    } else {
        Err(Failure::NotConverged)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(common) => cmd_run(common),
        Command::Sweep { common, axis } => cmd_sweep(common, axis),
        Command::Baseline(common) => cmd_baseline(common),
        Command::Nash { common, axis } => cmd_nash(common, axis),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::NotConverged) => {
            eprintln!("error: best-response iteration did not reach the tolerance; results written anyway");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
