//! Scenario files, seeded simulation runs, batch statistics and output
//! files.

mod config;
mod output;

pub use config::{
    load_scenario, BoundConfig, BoxRegion, DynamicsConfig, FilterConfig, HalfspaceConfig, InitialZeta, OneOrMany,
    PredicateConfig, PrivacyConfig, Resolved, ScenarioConfig,
};
pub use output::{dump_milps, emit_outputs, write_trajectories, TRAJECTORY_HEADER};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Graph, LinearDynamics};
use crate::encode::ConfidenceMode;
use crate::estimation::{
    build_gossip_probabilities, error_bound_trace, expected_gossip_matrix, kalman_schedule, refine_probabilities,
    ErrorBoundParams,
};
use crate::mtl::{boolean_sat, robustness, Trajectory};
use crate::privacy::{calibrate_sigma, gaussian_mechanism, sensitivity_upper, substream, NoiseSpec};
use crate::rhc::{agent_loop, AgentContext, Environment, ObjectiveMode, RhcConfig, RhcError, StepRecord, Termination};

/// Stream ids passed to [`substream`].
pub const NOISE_STREAM: u64 = 0;
pub const SCHEDULE_STREAM: u64 = 1;
/// Agent slot used for the communication schedule stream.
pub const SCHEDULE_AGENT: u64 = u64::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("run {run}: {source}")]
    Run { run: usize, source: RhcError },
}

impl SimError {
    pub fn invalid(path: &str, msg: impl Into<String>) -> Self {
        let path = if path.is_empty() { "(root)" } else { path };
        SimError::Invalid {
            path: path.to_string(),
            msg: msg.into(),
        }
    }
}

/// Command-line overrides of the scenario's modes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub confidence: Option<ConfidenceMode>,
    pub objective: Option<ObjectiveMode>,
}

/// Agent contexts and the graph for one run.
pub fn build_contexts(cfg: &ScenarioConfig, ov: Overrides) -> Result<(Vec<AgentContext>, Graph, Vec<NoiseSpec>), SimError> {
    let res = cfg.resolve()?;
    let n = cfg.agents;
    let dyn_cfg = &cfg.dynamics;
    let dynamics = LinearDynamics::new(
        dyn_cfg.a.expand(n, "dynamics.a")?,
        dyn_cfg.b.expand(n, "dynamics.b")?,
        dyn_cfg.c.expand(n, "dynamics.c")?,
        cfg.dims,
        dyn_cfg.u_min,
        dyn_cfg.u_max,
    )
    .map_err(|e| SimError::invalid("dynamics", e.to_string()))?;
    let noise: Vec<NoiseSpec> = res
        .privacy
        .iter()
        .enumerate()
        .map(|(i, p)| calibrate_sigma(sensitivity_upper(dynamics.c[i], p.nu), p))
        .collect::<Result<_, _>>()
        .map_err(|e| SimError::invalid("privacy", e.to_string()))?;
    let run_err = |e: RhcError| SimError::Run { run: 0, source: e };

    let p = build_gossip_probabilities(&res.graph).map_err(|e| SimError::invalid("edges", e.to_string()))?;
    let gossip = if cfg.gossip_refine_rounds > 0 {
        refine_probabilities(&res.graph, &p, cfg.gossip_refine_rounds)
    } else {
        expected_gossip_matrix(&p)
    }
    .map_err(|e| SimError::invalid("edges", e.to_string()))?;

    let b = &cfg.error_bound;
    let var_max = noise.iter().map(|s| s.sigma * s.sigma).fold(0.0, f64::max);
    let w_diag = match cfg.filter.as_ref().and_then(|f| f.w.clone()) {
        Some(w) => w,
        None => noise.iter().map(|s| s.sigma * s.sigma).collect(),
    };
    let sigma0 = cfg.filter.as_ref().and_then(|f| f.sigma0).unwrap_or(b.s_max);
    let schedule = kalman_schedule(
        DMatrix::identity(n, n) * sigma0,
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(w_diag)),
        0,
    )
    .map_err(|e| SimError::invalid("filter", e.to_string()))?;
    let error_params = ErrorBoundParams {
        lambda: gossip.lambda2,
        l1: b.l1,
        l2: b.l2,
        zeta_max: b.zeta_max.unwrap_or(100.0 * 2f64.sqrt()),
        s_max: b.s_max,
        v_max: b.v_max.unwrap_or(var_max).max(f64::MIN_POSITIVE),
        u_max: dyn_cfg.u_min.abs().max(dyn_cfg.u_max.abs()),
        n,
        multiplicative: b.multiplicative,
    };
    let mut rhc = RhcConfig::constant(res.horizon, 0.0, 0.5);
    rhc.r_min = cfg.r_min.expand(res.horizon, "r_min")?;
    rhc.gamma_min = cfg.gamma_min.expand(res.horizon, "gamma_min")?;
    rhc.big_m = cfg.big_m;
    rhc.confidence = ov.confidence.unwrap_or(cfg.confidence_mode);
    rhc.objective = ov.objective.unwrap_or(cfg.objective);

    let mut ctxs = Vec::with_capacity(n);
    for i in 0..n {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|l| match cfg.initial_zeta {
                _ if l == i => cfg.initial_states[l].clone(),
                InitialZeta::AllRows => cfg.initial_states[l].clone(),
                InitialZeta::OwnRow => vec![0.0; cfg.dims],
            })
            .collect();
        ctxs.push(
            AgentContext::new(
                i,
                cfg.initial_states[i].clone(),
                rows,
                schedule.clone(),
                gossip.clone(),
                res.phi_system.clone(),
                res.phi_agents[i].clone(),
                res.preds.clone(),
                noise[i],
                dynamics.clone(),
                error_params.clone(),
                rhc.clone(),
            )
            .map_err(run_err)?,
        );
    }
    Ok((ctxs, res.graph, noise))
}

struct SimEnv {
    graph: Graph,
    schedule: ChaCha12Rng,
    noise_rngs: Vec<ChaCha12Rng>,
    noise: Vec<NoiseSpec>,
}

impl Environment for SimEnv {
    fn pair(&mut self, _t: usize) -> (usize, usize) {
        let i = self.schedule.random_range(0..self.graph.len());
        let nb = self.graph.neighbors(i);
        let l = nb[self.schedule.random_range(0..nb.len())];
        (i, l)
    }

    fn privatize(&mut self, i: usize, _t: usize, y: &[f64]) -> Vec<f64> {
        gaussian_mechanism(y, &self.noise[i], &mut self.noise_rngs[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: usize,
    pub seed: u64,
    /// Number of recorded time steps.
    pub steps: usize,
    pub feasible: bool,
    pub termination: String,
    /// `[agent][dim]`: mean over `t >= 1` of `|ζ_i,d[t] - η_d[t]|`.
    pub mean_abs_error: Vec<Vec<f64>>,
    /// Realised η satisfies the system specification at every step whose
    /// horizon lies inside the run; `None` when no step qualifies.
    pub phi_system_satisfied: Option<bool>,
    pub phi_agents_satisfied: Vec<Option<bool>>,
    pub robustness_system: Vec<f64>,
    pub robustness_agents: Vec<Vec<f64>>,
    pub error_bound: Vec<f64>,
    pub sigma: Vec<f64>,
    pub lambda2: f64,
    /// Largest branch-and-bound node count of any solve.
    pub max_nodes: usize,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub metrics: RunMetrics,
    pub records: Vec<StepRecord>,
    /// Wall-clock seconds per solve as `(t, agent, seconds)`.
    pub solve_seconds: Vec<(usize, usize, f64)>,
}

fn realised_satisfaction(
    samples: Vec<Vec<f64>>,
    f: &crate::mtl::Formula,
    preds: &crate::mtl::PredicateTable,
) -> Result<(Option<bool>, Vec<f64>), RhcError> {
    let traj = Trajectory::new(samples)?;
    let h = f.horizon();
    if traj.len() <= h {
        return Ok((None, Vec::new()));
    }
    let mut all = true;
    let mut rho = Vec::with_capacity(traj.len() - h);
    for t in 0..traj.len() - h {
        all &= boolean_sat(&traj, f, t, preds)?;
        rho.push(robustness(&traj, f, t, preds)?);
    }
    Ok((Some(all), rho))
}

/// One seeded run. Run `run` of master seed `seed` draws its noise and
/// schedule from streams keyed on `(seed, run, agent, stream)`.
pub fn run_simulation(cfg: &ScenarioConfig, ov: Overrides, seed: u64, run: usize) -> Result<RunResult, SimError> {
    let (mut ctxs, graph, noise) = build_contexts(cfg, ov)?;
    let res = cfg.resolve()?;
    let n = cfg.agents;
    let mut env = SimEnv {
        graph: graph.clone(),
        schedule: substream(seed, run as u64, SCHEDULE_AGENT, SCHEDULE_STREAM),
        noise_rngs: (0..n).map(|i| substream(seed, run as u64, i as u64, NOISE_STREAM)).collect(),
        noise: noise.clone(),
    };
    let out = agent_loop(&mut ctxs, &graph, &mut env, cfg.tau).map_err(|e| SimError::Run { run, source: e })?;
    let recs = &out.records;
    let wrap = |e: RhcError| SimError::Run { run, source: e };

    let mut mae = vec![vec![0.0; cfg.dims]; n];
    let count = recs.len().saturating_sub(1);
    for r in recs.iter().skip(1) {
        for i in 0..n {
            for d in 0..cfg.dims {
                mae[i][d] += (r.zeta[i][d] - r.eta[d]).abs();
            }
        }
    }
    if count > 0 {
        mae.iter_mut().flatten().for_each(|v| *v /= count as f64);
    }
    let eta: Vec<Vec<f64>> = recs.iter().map(|r| r.eta.clone()).collect();
    let (phi_s_sat, rho_s) = realised_satisfaction(eta, &res.phi_system, &res.preds).map_err(wrap)?;
    let mut phi_i_sat = Vec::with_capacity(n);
    let mut rho_i = Vec::with_capacity(n);
    for i in 0..n {
        let s: Vec<Vec<f64>> = recs.iter().map(|r| r.states[i].clone()).collect();
        let (sat, rho) = realised_satisfaction(s, &res.phi_agents[i], &res.preds).map_err(wrap)?;
        phi_i_sat.push(sat);
        rho_i.push(rho);
    }
    let mut solve_seconds = Vec::new();
    let mut max_nodes = 0;
    for r in recs {
        for (i, p) in r.plans.iter().enumerate() {
            solve_seconds.push((r.t, i, p.solve_seconds));
            max_nodes = max_nodes.max(p.nodes);
        }
    }
    let (feasible, termination) = match &out.termination {
        Termination::Horizon => (true, "horizon reached".to_string()),
        Termination::Infeasible { step, agent, reason } => {
            (false, format!("infeasible at step {step} (agent {}): {reason}", agent + 1))
        }
    };
    let metrics = RunMetrics {
        run,
        seed,
        steps: recs.len(),
        feasible,
        termination,
        mean_abs_error: mae,
        phi_system_satisfied: phi_s_sat,
        phi_agents_satisfied: phi_i_sat,
        robustness_system: rho_s,
        robustness_agents: rho_i,
        error_bound: error_bound_trace(recs.len(), &ctxs[0].error_params),
        sigma: noise.iter().map(|s| s.sigma).collect(),
        lambda2: ctxs[0].gossip.lambda2,
        max_nodes,
    };
    Ok(RunResult {
        metrics,
        records: out.records,
        solve_seconds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Spread {
                mean: f64::NAN,
                std: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Spread {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchMetrics {
    pub runs: usize,
    pub master_seed: u64,
    pub objective_note: String,
    pub feasible_runs: usize,
    /// Fraction of completed runs whose realised η satisfies the system
    /// specification.
    pub p_phi_system: f64,
    pub p_phi_agents: Vec<f64>,
    /// `[agent][dim]` statistics of the per-run mean absolute errors.
    pub mean_abs_error: Vec<Vec<Spread>>,
    pub per_run: Vec<RunMetrics>,
    /// Runs that stopped with an error, as `(run, message)`.
    pub errors: Vec<(usize, String)>,
}

fn objective_note(mode: ObjectiveMode) -> String {
    match mode {
        ObjectiveMode::OneNorm => "inputs penalised by the summed 1-norm (linear stand-in for the squared 2-norm)".into(),
        ObjectiveMode::InfNorm => "inputs penalised by the summed infinity norm (linear stand-in for the squared 2-norm)".into(),
    }
}

/// `runs` independent runs; per-run errors are collected, not fatal.
pub fn run_batch(cfg: &ScenarioConfig, ov: Overrides, seed: u64, runs: usize) -> Result<(BatchMetrics, Vec<RunResult>), SimError> {
    if runs == 0 {
        return Err(SimError::invalid("runs", "need at least one run"));
    }
    cfg.resolve()?;
    let mut results = Vec::with_capacity(runs);
    let mut errors = Vec::new();
    for r in 0..runs {
        match run_simulation(cfg, ov, seed, r) {
            Ok(res) => results.push(res),
            Err(e) => errors.push((r, e.to_string())),
        }
    }
    Ok((aggregate(cfg, ov, seed, runs, &results, errors), results))
}

pub fn aggregate(
    cfg: &ScenarioConfig,
    ov: Overrides,
    seed: u64,
    runs: usize,
    results: &[RunResult],
    errors: Vec<(usize, String)>,
) -> BatchMetrics {
    let n = cfg.agents;
    let done = results.len().max(1) as f64;
    let frac = |f: &dyn Fn(&RunMetrics) -> bool| results.iter().filter(|r| f(&r.metrics)).count() as f64 / done;
    let p_phi_system = frac(&|m| m.phi_system_satisfied == Some(true));
    let p_phi_agents = (0..n).map(|i| frac(&|m| m.phi_agents_satisfied[i] == Some(true))).collect();
    let mean_abs_error = (0..n)
        .map(|i| {
            (0..cfg.dims)
                .map(|d| Spread::of(&results.iter().map(|r| r.metrics.mean_abs_error[i][d]).collect::<Vec<_>>()))
                .collect()
        })
        .collect();
    BatchMetrics {
        runs,
        master_seed: seed,
        objective_note: objective_note(ov.objective.unwrap_or(cfg.objective)),
        feasible_runs: results.iter().filter(|r| r.metrics.feasible).count(),
        p_phi_system,
        p_phi_agents,
        mean_abs_error,
        per_run: results.iter().map(|r| r.metrics.clone()).collect(),
        errors,
    }
}
