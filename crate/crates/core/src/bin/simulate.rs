use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use dprhc::encode::ConfidenceMode;
use dprhc::rhc::ObjectiveMode;
use dprhc::sim::{dump_milps, emit_outputs, load_scenario, run_batch, Overrides, SimError};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ConfidenceArg {
    Paper,
    Sound,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ObjectiveArg {
    OneNorm,
    InfNorm,
}

/// Runs seeded simulations of a scenario file and writes trajectories and
/// metrics.
///
/// Exit status: 0 on success, 2 on an invalid scenario, 3 when a run stops
/// because a Diff-MILP became infeasible, 1 on any other failure.
#[derive(Parser, Debug)]
#[command(name = "simulate", version)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the run count in the scenario.
    #[arg(long)]
    runs: Option<usize>,
    /// Overrides the master seed in the scenario.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    confidence_mode: Option<ConfidenceArg>,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    /// Also write every agent's first Diff-MILP in LP format.
    #[arg(long)]
    dump_milp: bool,
    /// Also write per-solve wall-clock times to `solve_times.csv`.
    #[arg(long)]
    timings: bool,
}

fn run(args: Args) -> anyhow::Result<ExitCode> {
    let cfg = match load_scenario(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid scenario {}: {e}", args.config.display());
            return Ok(ExitCode::from(2));
        }
    };
    let ov = Overrides {
        confidence: args.confidence_mode.map(|c| match c {
            ConfidenceArg::Paper => ConfidenceMode::PaperFaithful,
            ConfidenceArg::Sound => ConfidenceMode::Sound,
        }),
        objective: args.objective.map(|o| match o {
            ObjectiveArg::OneNorm => ObjectiveMode::OneNorm,
            ObjectiveArg::InfNorm => ObjectiveMode::InfNorm,
        }),
    };
    let seed = args.seed.unwrap_or(cfg.seed);
    let runs = args.runs.unwrap_or(cfg.runs);
    if args.dump_milp {
        dump_milps(&args.out, &cfg, ov).context("writing Diff-MILP files")?;
    }
    let (metrics, results) = match run_batch(&cfg, ov, seed, runs) {
        Ok(r) => r,
        Err(e @ SimError::Invalid { .. }) => {
            eprintln!("invalid scenario: {e}");
            return Ok(ExitCode::from(2));
        }
        Err(e) => return Err(e.into()),
    };
    emit_outputs(&args.out, &results, &metrics, args.timings)?;
    eprintln!(
        "{} runs, {} feasible, P(phi_system) = {:.3}, outputs in {}",
        runs,
        metrics.feasible_runs,
        metrics.p_phi_system,
        args.out.display()
    );
    for (r, e) in &metrics.errors {
        eprintln!("run {r} failed: {e}");
    }
    if !metrics.errors.is_empty() {
        return Ok(ExitCode::from(1));
    }
    if metrics.feasible_runs < results.len() {
        for r in results.iter().filter(|r| !r.metrics.feasible) {
            eprintln!("run {}: {}", r.metrics.run, r.metrics.termination);
        }
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
