use std::fs;
use std::io::Write;
use std::path::Path;

use super::{build_contexts, BatchMetrics, Overrides, RunResult, ScenarioConfig, SimError};
use crate::rhc::{assemble_diff_milp, StepRecord};

pub const TRAJECTORY_HEADER: [&str; 6] = ["run", "t", "agent", "kind", "dim", "value"];

fn io_err(path: &Path, e: impl std::fmt::Display) -> SimError {
    SimError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

/// Long-format trajectory rows. Agents are 1-based; `eta` rows use agent 0.
pub fn write_trajectories<W: Write>(out: W, runs: &[(usize, &[StepRecord])]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for &(run, recs) in runs {
        for r in recs {
            let mut row = |agent: usize, kind: &str, values: &[f64]| -> Result<(), csv::Error> {
                for (d, v) in values.iter().enumerate() {
                    w.write_record([
                        run.to_string(),
                        r.t.to_string(),
                        agent.to_string(),
                        kind.to_string(),
                        (d + 1).to_string(),
                        v.to_string(),
                    ])?;
                }
                Ok(())
            };
            for (i, s) in r.states.iter().enumerate() {
                row(i + 1, "state", s)?;
            }
            for (i, z) in r.zeta.iter().enumerate() {
                row(i + 1, "zeta", z)?;
            }
            row(0, "eta", &r.eta)?;
            if let Some(u) = &r.inputs {
                for (i, u) in u.iter().enumerate() {
                    row(i + 1, "input", u)?;
                }
            }
            for (i, y) in r.noisy_outputs.iter().enumerate() {
                row(i + 1, "noisy_output", y)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes `trajectories.csv`, `metrics.json`, `solves.csv` and per-run plot
/// tables under `plots/`, all functions of the scenario and seed alone.
/// With `timings`, also writes the wall-clock `solve_times.csv`.
pub fn emit_outputs(dir: &Path, results: &[RunResult], metrics: &BatchMetrics, timings: bool) -> Result<(), SimError> {
    fs::create_dir_all(dir.join("plots")).map_err(|e| io_err(dir, e))?;

    let traj = dir.join("trajectories.csv");
    let f = fs::File::create(&traj).map_err(|e| io_err(&traj, e))?;
    let runs: Vec<(usize, &[StepRecord])> = results.iter().map(|r| (r.metrics.run, r.records.as_slice())).collect();
    write_trajectories(std::io::BufWriter::new(f), &runs).map_err(|e| io_err(&traj, e))?;

    let mpath = dir.join("metrics.json");
    let text = serde_json::to_string_pretty(metrics).map_err(|e| io_err(&mpath, e))?;
    fs::write(&mpath, text + "\n").map_err(|e| io_err(&mpath, e))?;

    let header = |cols: &[&str]| cols.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let mut solves = Vec::new();
    let mut times = Vec::new();
    for r in results {
        for rec in &r.records {
            for (i, p) in rec.plans.iter().enumerate() {
                let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
                solves.push(vec![
                    r.metrics.run.to_string(),
                    rec.t.to_string(),
                    (i + 1).to_string(),
                    p.nodes.to_string(),
                    p.lp_iterations.to_string(),
                    p.objective.to_string(),
                    min(&p.rho_agent).to_string(),
                    min(&p.rho_system).to_string(),
                    p.system_threshold.to_string(),
                ]);
            }
        }
        for &(t, i, s) in &r.solve_seconds {
            times.push(vec![r.metrics.run.to_string(), t.to_string(), (i + 1).to_string(), format!("{s:.6}")]);
        }
    }
    write_csv(
        &dir.join("solves.csv"),
        &header(&["run", "t", "agent", "nodes", "lp_iterations", "objective", "min_rho_agent", "min_rho_system", "system_threshold"]),
        &solves,
    )?;
    if timings {
        write_csv(&dir.join("solve_times.csv"), &header(&["run", "t", "agent", "seconds"]), &times)?;
    }

    // Wide tables for the estimate-versus-average and state plots.
    for r in results {
        let Some(first) = r.records.first() else { continue };
        let (n, dims) = (first.states.len(), first.eta.len());
        for d in 0..dims {
            let mut cols = vec!["t".to_string(), "eta".to_string()];
            cols.extend((1..=n).map(|i| format!("zeta_{i}")));
            let rows: Vec<Vec<String>> = r
                .records
                .iter()
                .map(|rec| {
                    let mut row = vec![rec.t.to_string(), rec.eta[d].to_string()];
                    row.extend(rec.zeta.iter().map(|z| z[d].to_string()));
                    row
                })
                .collect();
            write_csv(&dir.join(format!("plots/run{}_zeta_d{}.csv", r.metrics.run, d + 1)), &cols, &rows)?;

            let mut cols = vec!["t".to_string()];
            cols.extend((1..=n).map(|i| format!("state_{i}")));
            let rows: Vec<Vec<String>> = r
                .records
                .iter()
                .map(|rec| {
                    let mut row = vec![rec.t.to_string()];
                    row.extend(rec.states.iter().map(|s| s[d].to_string()));
                    row
                })
                .collect();
            write_csv(&dir.join(format!("plots/run{}_states_d{}.csv", r.metrics.run, d + 1)), &cols, &rows)?;
        }
    }
    Ok(())
}

/// Writes each agent's Diff-MILP at `t = 0` as `milp/agent<i>_t0.lp`.
pub fn dump_milps(dir: &Path, cfg: &ScenarioConfig, ov: Overrides) -> Result<(), SimError> {
    let mdir = dir.join("milp");
    fs::create_dir_all(&mdir).map_err(|e| io_err(&mdir, e))?;
    let (mut ctxs, ..) = build_contexts(cfg, ov)?;
    for c in ctxs.iter_mut() {
        let dm = assemble_diff_milp(c, 0).map_err(|e| SimError::Run { run: 0, source: e })?;
        let path = mdir.join(format!("agent{}_t0.lp", c.id + 1));
        fs::write(&path, milp::write_lp(&dm.model)).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}
