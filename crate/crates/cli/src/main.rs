//! `d2d-mec`: generate scenarios, run schemes, sweep experiments and run
//! the validation oracles from the shell.
//!
//! Exit codes: 0 on success (an infeasible scheme is a recorded outcome,
//! not a failure), 1 for bad usage or input, 2 when a solver breaks down
//! or a validation check fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use mec_core::harness::{run_scheme, validate_result, validate_scenario, ExperimentConfig, RunOptions};
use mec_core::scenario::{gen_instance, load_scenario, save_scenario, GenConfig, ScenarioFile};
use mec_core::{Error, Scheme};

#[derive(Debug, Parser)]
#[command(name = "d2d-mec", version, about = "Latency-optimal task offloading to D2D helpers over TDMA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a random scenario and write it as `.scn.json`.
    Generate {
        /// Generator settings (TOML); defaults are used when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output path; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one scheme on a scenario.
    Solve {
        scenario: PathBuf,
        #[arg(long, default_value = "joint")]
        scheme: String,
        /// Seed of the random-assignment scheme.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Result path; defaults to the scenario path with `.result.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep a parameter over many realizations and write CSV plus a JSON sidecar.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the realization count of the config.
        #[arg(long)]
        realizations: Option<usize>,
        /// Overrides the generator seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// CSV path; defaults to `<name>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the joint scheme and every oracle on a scenario and print a table.
    Validate {
        scenario: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_solver_failure() { 2 } else { 1 }, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Generate { config, seed, out } => generate(config.as_deref(), seed, out.as_deref()),
        Command::Solve { scenario, scheme, seed, out } => solve(&scenario, &scheme, seed, out),
        Command::Experiment { config, realizations, seed, out } => experiment(&config, realizations, seed, out),
        Command::Validate { scenario, out } => validate(&scenario, out.as_deref()),
    }
}

fn generate(config: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    let mut cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            toml::from_str::<GenConfig>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => GenConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let scenario = gen_instance::<f64>(&cfg, 0)?;
    let file = ScenarioFile::generated(scenario, &cfg);
    match out {
        Some(p) => {
            save_scenario(p, &file)?;
            info!("wrote {}", p.display());
        }
        None => println!("{}", file.to_json()),
    }
    Ok(())
}

/// `foo.scn.json` -> `foo.result.json`.
fn result_path(scenario: &Path) -> PathBuf {
    let name = scenario.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(".scn.json").or_else(|| name.strip_suffix(".json")).unwrap_or(&name);
    scenario.with_file_name(format!("{stem}.result.json"))
}

fn solve(path: &Path, scheme: &str, seed: u64, out: Option<PathBuf>) -> Result<(), Failure> {
    let scheme: Scheme = scheme.parse()?;
    let file = load_scenario(path)?;
    let result = run_scheme(scheme, &file.scenario, &RunOptions { seed, ..RunOptions::default() })?;
    let out = out.unwrap_or_else(|| result_path(path));
    let mut json = serde_json::to_string_pretty(&result).map_err(|e| Error::Config(e.to_string()))?;
    json.push('\n');
    fs::write(&out, json)?;

    println!("scheme     {scheme}");
    println!("status     {:?}", result.status);
    if result.is_feasible() {
        println!("latency    {:.6} ms", 1e3 * result.latency_s);
        let devices = result.assignment.devices();
        println!("devices    {devices:?}");
        println!("energy     {:?} J", result.energy_j);
        if let Some(gap) = result.diagnostics.relative_gap {
            println!("gap        {gap:e}");
        }
        let rep = validate_result(&file.scenario, &result);
        if !rep.passes() {
            print!("{}", rep.table());
            return Err(Failure { code: 2, msg: "result failed its consistency checks".into() });
        }
    }
    for note in &result.diagnostics.notes {
        println!("note       {note}");
    }
    println!("written    {}", out.display());
    Ok(())
}

fn experiment(config: &Path, realizations: Option<usize>, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(r) = realizations {
        cfg.realizations = r;
    }
    if let Some(s) = seed {
        cfg.generator.seed = s;
    }
    cfg.validate()?;
    let report = mec_core::harness::run_experiment(&cfg)?;
    let out = out.unwrap_or_else(|| {
        let name = if cfg.name.is_empty() { "experiment" } else { cfg.name.as_str() };
        PathBuf::from(format!("{name}.csv"))
    });
    let sidecar = report.write(&out)?;
    print!("{}", report.summary());
    for note in &report.notes {
        println!("note: {note}");
    }
    if !report.failures.is_empty() {
        println!("{} realization solves failed and were excluded", report.failures.len());
    }
    for v in &report.ordering_violations {
        println!("ordering violation: {v:?}");
    }
    println!("written {} and {}", out.display(), sidecar.display());
    Ok(())
}

fn validate(path: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let file = load_scenario(path)?;
    let report = validate_scenario(&file.scenario)?;
    print!("{}", report.table());
    if let Some(p) = out {
        let mut json = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
        json.push('\n');
        fs::write(p, json)?;
    }
    if report.passes() {
        Ok(())
    } else {
        Err(Failure { code: 2, msg: "validation failed".into() })
    }
}
