use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use drfeas::harness::{builtin_scenarios, find_scenario, run_scenarios, write_outputs, RunOptions, Scenario};
use drfeas::regularity::diagnose;
use drfeas::{Error, Vector};

const EXIT_EXPECTATION: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "drfeas", version, about = "Douglas-Rachford feasibility runs and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write `<name>.trajectory.csv` and `<name>.report.json`.
    Run(RunArgs),
    /// Print regularity diagnostics at the scenario's reference point.
    Diagnose(DiagnoseArgs),
    /// List the built-in scenarios.
    List,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "source")]
struct Source {
    /// Built-in scenario name; repeat or separate with commas to run several concurrently.
    #[arg(long, value_delimiter = ',')]
    scenario: Vec<String>,
    /// Scenario file: {"A": <set>, "B": <set>, "x0": [...], "w_hint": [...]}.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Starting point override, comma separated. Drops expectations that depend on the start.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_vector)]
    x0: Option<Vector>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_vector(s: &str) -> Result<Vector, String> {
    let coords = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Vector::new(coords).map_err(|e| e.to_string())
}

fn load(source: &Source) -> Result<Vec<Scenario>, Error> {
    match &source.config {
        Some(path) => Ok(vec![Scenario::from_file(path)?]),
        None => source.scenario.iter().map(|n| find_scenario(n)).collect(),
    }
}

fn run(args: RunArgs) -> Result<bool, Error> {
    let mut scenarios = load(&args.source)?;
    if let Some(x0) = &args.x0 {
        scenarios = scenarios.iter().map(|s| s.with_start(x0.clone())).collect::<Result<_, _>>()?;
    }
    let defaults = RunOptions::default();
    let opts = RunOptions {
        max_iters: args.max_iters.unwrap_or(defaults.max_iters),
        tol: args.tol.unwrap_or(defaults.tol),
        seed: args.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    let mut all_passed = true;
    for (s, outcome) in scenarios.iter().zip(run_scenarios(&scenarios, &opts)) {
        let outcome = outcome?;
        let (_, json) = write_outputs(&outcome, &args.out_dir)?;
        let r = &outcome.report;
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!(
            "{}: {verdict} ({} iterations, {}) -> {}",
            s.name,
            r.trajectory.iters,
            r.trajectory.stop_reason,
            json.display()
        );
        for c in r.checks.iter().filter(|c| !c.passed) {
            eprintln!("  {} failed: {}", c.name, c.detail);
        }
        all_passed &= r.passed;
    }
    Ok(all_passed)
}

fn diagnose_cmd(args: DiagnoseArgs) -> Result<bool, Error> {
    let defaults = RunOptions::default();
    let opts = RunOptions {
        delta: args.delta.unwrap_or(defaults.delta),
        count: args.count.unwrap_or(defaults.count),
        seed: args.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    for s in load(&args.source)? {
        let w = s
            .w_hint
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("scenario `{}` has no w_hint", s.name)))?;
        let (_, d) = diagnose(&s.a, &s.b, w, &opts.diagnose_options(), &s.oracle()?)?;
        println!("{}", serde_json::to_string_pretty(&d)?);
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Diagnose(args) => diagnose_cmd(args),
        Command::List => {
            for s in builtin_scenarios() {
                println!("{:<20} {}", s.name, s.description);
            }
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_EXPECTATION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
