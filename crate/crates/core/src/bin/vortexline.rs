use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vortexline::{load_config_for, run_scenario, write_outputs, Error, ScenarioKind};

/// Vortex filament dynamics and its free-particle description.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    scenario: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve an initial filament and record observables over time.
    Evolve(RunArgs),
    /// Tabulate the linear and nonlinear dispersion relations.
    Dispersion(RunArgs),
    /// Characteristic time and amplitude bound of the linear description.
    Validity(RunArgs),
    /// Observables and operator identities of a single state.
    Observables(RunArgs),
    /// Evolve with the path-integral kernel and compare with the spectral step.
    Propagate(RunArgs),
    /// Compare the Biot-Savart velocity with the local induction velocity.
    BiotSavartCompare(RunArgs),
    /// Linear/nonlinear phase drift of a Kelvin wave.
    PhaseDivergence(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides `output.dir` (default: `out`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

impl Command {
    fn split(self) -> (ScenarioKind, RunArgs) {
        match self {
            Command::Evolve(a) => (ScenarioKind::Evolve, a),
            Command::Dispersion(a) => (ScenarioKind::Dispersion, a),
            Command::Validity(a) => (ScenarioKind::Validity, a),
            Command::Observables(a) => (ScenarioKind::Observables, a),
            Command::Propagate(a) => (ScenarioKind::Propagate, a),
            Command::BiotSavartCompare(a) => (ScenarioKind::BiotSavartCompare, a),
            Command::PhaseDivergence(a) => (ScenarioKind::PhaseDivergence, a),
        }
    }
}

fn run(kind: ScenarioKind, args: &RunArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| Error::Io {
        path: args.config.clone(),
        source,
    })?;
    let config = load_config_for(&text, kind)?;
    let record = run_scenario(&config)?;
    let dir = args
        .out
        .clone()
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let files = write_outputs(&record, &dir)?;
    if !args.quiet {
        println!("{} finished in {:.3} s", kind.as_str(), record.wall_clock_seconds);
        for (key, value) in &record.results {
            println!("  {key} = {value}");
        }
        println!("wrote {} and {}", files.series.display(), files.metadata.display());
        if !files.snapshots.is_empty() {
            println!("wrote {} snapshot(s)", files.snapshots.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // bad arguments are a validation failure; --help and --version are not
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (kind, args) = cli.scenario.split();
    match run(kind, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
