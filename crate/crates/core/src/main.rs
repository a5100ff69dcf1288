//! Command-line front end: each subcommand takes a TOML config and an
//! output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use optgap::harness::{
    self, drift_report, run, run_csv_string, sde_sim, sweep, DriftConfig, ProblemSpec, RunConfig,
    SdeSimConfig, SweepConfig,
};
use optgap::problems::build_hessian;
use optgap::Result;

#[derive(Parser)]
#[command(name = "optgap", about = "Optimizer batch-size gap experiments on quadratic testbeds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a block-quadratic problem and emit its Hessian and spectrum.
    BuildProblem(Io),
    /// Execute a single run and emit run.csv + summary.json.
    Run(Io),
    /// Execute an (optimizer x batch x lr x seed) grid; emits per-run CSVs
    /// and sweep.json. Exits nonzero when every cell diverged.
    Sweep(Io),
    /// Integrate an SDE model and emit trajectory.csv.
    SdeSim(Io),
    /// Monte Carlo check of the erf drift identity; emits drift_report.csv.
    DriftReport(Io),
}

#[derive(clap::Args)]
struct Io {
    /// Path to the TOML config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(toml::from_str(&text)?)
}

fn cmd_build_problem(io: &Io) -> Result<ExitCode> {
    let spec: ProblemSpec = load_config(&io.config)?;
    let quad = match spec {
        ProblemSpec::BlockQuadratic(s) => s,
        ProblemSpec::NoisyIsotropic(_) => {
            return Err(optgap::Error::InvalidConfig(
                "build-problem expects a block_quadratic problem".into(),
            ))
        }
    };
    let problem = build_hessian(&quad)?;
    fs::create_dir_all(&io.out)?;
    let mut h = fs::File::create(io.out.join("hessian.csv"))?;
    let mut s = fs::File::create(io.out.join("spectrum.csv"))?;
    harness::write_problem_csv(&problem, &mut h, &mut s)?;
    println!("wrote {}", io.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(io: &Io) -> Result<ExitCode> {
    let config: RunConfig = load_config(&io.config)?;
    let record = run(&config)?;
    fs::create_dir_all(&io.out)?;
    fs::write(io.out.join("run.csv"), run_csv_string(&record)?)?;
    let summary = serde_json::json!({
        "final_loss": record.final_loss,
        "diverged_at": record.diverged_at,
        "steps_logged": record.rows.len(),
        "wall_time_s": record.wall_time_s,
    });
    fs::write(
        io.out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    if let Some(step) = record.diverged_at {
        eprintln!("run diverged at step {step}");
        return Ok(ExitCode::from(2));
    }
    println!("final loss {}", record.final_loss);
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(io: &Io) -> Result<ExitCode> {
    let config: SweepConfig = load_config(&io.config)?;
    fs::create_dir_all(&io.out)?;
    let runs_dir = io.out.join("runs");
    let result = sweep(&config, Some(&runs_dir))?;
    fs::write(
        io.out.join("sweep.json"),
        serde_json::to_string_pretty(&result)?,
    )?;
    for b in &result.best {
        match b.lr {
            Some(lr) => println!(
                "{} B={}: best lr {} mean final loss {}",
                b.optimizer,
                b.batch_size,
                lr,
                b.mean_final_loss.unwrap_or(f64::NAN)
            ),
            None => println!("{} B={}: diverged at every learning rate", b.optimizer, b.batch_size),
        }
    }
    if result.best.iter().all(|b| b.lr.is_none()) {
        eprintln!("every sweep cell diverged");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sde_sim(io: &Io) -> Result<ExitCode> {
    let config: SdeSimConfig = load_config(&io.config)?;
    let dt = config.dt.unwrap_or(config.eta);
    let (trajectory, losses) = sde_sim(&config)?;
    fs::create_dir_all(&io.out)?;
    let mut f = fs::File::create(io.out.join("trajectory.csv"))?;
    harness::write_trajectory_csv(&trajectory, &losses, dt, &mut f)?;
    println!("final loss {}", losses.last().unwrap());
    Ok(ExitCode::SUCCESS)
}

fn cmd_drift_report(io: &Io) -> Result<ExitCode> {
    let config: DriftConfig = load_config(&io.config)?;
    let rows = drift_report(&config)?;
    fs::create_dir_all(&io.out)?;
    let mut f = fs::File::create(io.out.join("drift_report.csv"))?;
    harness::write_drift_csv(&rows, &mut f)?;
    let passed = rows.iter().filter(|r| r.pass).count();
    println!("{passed}/{} cells within 4 standard errors", rows.len());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::BuildProblem(io) => cmd_build_problem(io),
        Command::Run(io) => cmd_run(io),
        Command::Sweep(io) => cmd_sweep(io),
        Command::SdeSim(io) => cmd_sde_sim(io),
        Command::DriftReport(io) => cmd_drift_report(io),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
