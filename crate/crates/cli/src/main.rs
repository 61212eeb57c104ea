//! `spincorr <scenario> [flags]`: runs one experiment and writes
//! `<out>/<scenario>_<timestamp>/{data.csv,summary.json}`.
//!
//! Exit status: 0 success, 2 a validation check failed, 1 any error
//! (configuration, I/O or numerical).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spincorr::experiments::{self, EngineChoice, Scenario, ScenarioConfig};
use spincorr::Error;

#[derive(Parser, Debug)]
#[command(name = "spincorr", version, about = "Spin-network transport under spatially correlated noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single time evolution from one excited site.
    Evolve(RunArgs),
    /// Transfer quality against correlation length for several chain lengths.
    SweepXi(RunArgs),
    /// Long-time populations of uncoupled spins under collective relaxation.
    Blocking(RunArgs),
    /// Stroboscopic end-site populations over many transfer passes.
    Strobe(RunArgs),
    /// Cross-engine and closed-form consistency checks.
    Validate(RunArgs),
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Key-value configuration file (`key = value`, `#` comments).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parent directory of the run directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Worker threads for sweeps (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_parser = ["full", "reduced", "auto"])]
    engine: Option<String>,
    /// Accepted for interface stability; the dynamics are deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Omit the timestamp from the run directory name.
    #[arg(long)]
    no_timestamp: bool,
}

impl Command {
    fn split(&self) -> (Scenario, &RunArgs) {
        match self {
            Command::Evolve(a) => (Scenario::Evolve, a),
            Command::SweepXi(a) => (Scenario::SweepXi, a),
            Command::Blocking(a) => (Scenario::Blocking, a),
            Command::Strobe(a) => (Scenario::Strobe, a),
            Command::Validate(a) => (Scenario::Validate, a),
        }
    }
}

fn load_config(scenario: Scenario, args: &RunArgs) -> Result<ScenarioConfig, Error> {
    let mut cfg = ScenarioConfig::defaults(scenario);
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(e) = &args.engine {
        cfg.engine = e.parse::<EngineChoice>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_dir(out: &Path, scenario: Scenario, timestamp: bool) -> PathBuf {
    let base = if timestamp {
        format!("{}_{}", scenario.name(), chrono::Local::now().format("%Y%m%dT%H%M%S"))
    } else {
        scenario.name().to_string()
    };
    let mut dir = out.join(&base);
    let mut k = 1;
    while timestamp && dir.exists() {
        dir = out.join(format!("{base}_{k}"));
        k += 1;
    }
    dir
}

fn execute(cli: &Cli) -> Result<bool, Error> {
    let (scenario, args) = cli.command.split();
    let cfg = load_config(scenario, args)?;
    let mut output = experiments::run(&cfg)?;
    if let (Some(seed), Some(obj)) = (args.seed, output.summary.as_object_mut()) {
        obj.insert("seed".into(), serde_json::Value::from(seed));
    }
    let dir = run_dir(&args.out, scenario, !args.no_timestamp);
    experiments::write_run(&dir, &output.rows, &output.summary)?;
    println!("{}", dir.display());
    if !output.passed {
        eprintln!("validation failed: {}", output.summary["failed"]);
    }
    Ok(output.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
