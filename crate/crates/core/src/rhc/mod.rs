//! Receding-horizon planning: the per-agent Diff-MILP and the lock-step
//! loop that runs every agent through it.

mod assemble;
mod run;

pub use assemble::{assemble_diff_milp, window_len, DiffMilp};
pub use run::{agent_loop, Environment, LoopOutput, StepRecord, Termination};

use std::time::Instant;

use milp::{solve_milp, SolveError, SolverOptions, Status};
use thiserror::Error;

use crate::dynamics::{DynamicsError, LinearDynamics};
use crate::encode::{ConfidenceMode, EncodeError};
use crate::estimation::{error_bound_trace, ErrorBoundParams, EstimationError, GossipMatrix, KalmanSchedule};
use crate::mtl::{robustness, Formula, MtlError, PredicateTable, Trajectory};
use crate::privacy::NoiseSpec;

/// Slack allowed when re-checking planned robustness against thresholds.
pub const POST_CHECK_TOL: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RhcError {
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Mtl(#[from] MtlError),
    #[error("solver failed at step {step}: {source}")]
    Solver { step: usize, source: SolveError },
    #[error("step {step}: planned robustness {got} of the {which} specification at offset {j} is below {need}")]
    PostCheck {
        step: usize,
        which: &'static str,
        j: usize,
        got: f64,
        need: f64,
    },
    #[error("invalid controller configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// Sum over steps of the 1-norm of all planned inputs.
    #[default]
    OneNorm,
    /// Sum over steps of the largest absolute planned input.
    InfNorm,
}

/// How the state, estimate, output and gossip recursions enter the model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DiffMilpForm {
    /// Recursions are substituted into affine expressions of the inputs.
    #[default]
    Substituted,
    /// Every recursion value is a free variable tied by an equality row.
    Explicit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RhcConfig {
    /// Specification horizon `H`; plans cover at least `2H` inputs.
    pub horizon: usize,
    /// Robustness threshold for each offset `j < H`.
    pub r_min: Vec<f64>,
    /// Confidence target for each offset `j < H`.
    pub gamma_min: Vec<f64>,
    pub big_m: f64,
    pub objective: ObjectiveMode,
    pub confidence: ConfidenceMode,
    pub form: DiffMilpForm,
    pub solver: SolverOptions,
}

impl RhcConfig {
    /// Same threshold and confidence at every offset.
    pub fn constant(horizon: usize, r_min: f64, gamma_min: f64) -> Self {
        Self {
            horizon,
            r_min: vec![r_min; horizon],
            gamma_min: vec![gamma_min; horizon],
            big_m: 1000.0,
            objective: ObjectiveMode::OneNorm,
            confidence: ConfidenceMode::PaperFaithful,
            form: DiffMilpForm::Substituted,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), RhcError> {
        let h = self.horizon;
        if h == 0 {
            return Err(RhcError::Config("horizon must be at least 1".into()));
        }
        if self.r_min.len() != h || self.gamma_min.len() != h {
            return Err(RhcError::Config(format!(
                "r_min and gamma_min need {h} entries, got {} and {}",
                self.r_min.len(),
                self.gamma_min.len()
            )));
        }
        if let Some(r) = self.r_min.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return Err(RhcError::Config(format!("r_min entry {r}")));
        }
        if let Some(g) = self.gamma_min.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
            return Err(RhcError::Config(format!("gamma_min entry {g} outside (0, 1)")));
        }
        if !(self.big_m > 0.0) || !self.big_m.is_finite() {
            return Err(RhcError::Config(format!("big_m = {}", self.big_m)));
        }
        Ok(())
    }
}

/// Everything agent `id` knows when it plans.
#[derive(Clone, Debug)]
pub struct AgentContext {
    pub id: usize,
    /// Own true state.
    pub state: Vec<f64>,
    /// Estimates of every agent's state, one row per agent.
    pub xhat: Vec<Vec<f64>>,
    /// Estimates of the system average, one row per agent.
    pub zeta: Vec<Vec<f64>>,
    /// Noisy-output rows used in the last filter step.
    pub y_noisy: Vec<Vec<f64>>,
    /// Inputs of every agent at `t - 1`, as known to this agent.
    pub u_prev: Vec<Vec<f64>>,
    /// Inputs at `t - 2`.
    pub u_prev2: Vec<Vec<f64>>,
    pub kalman: KalmanSchedule,
    pub gossip: GossipMatrix,
    pub phi_s: Formula,
    pub phi_i: Formula,
    pub preds: PredicateTable,
    pub noise: NoiseSpec,
    pub dynamics: LinearDynamics,
    pub error_params: ErrorBoundParams,
    pub cfg: RhcConfig,
    eps: Vec<f64>,
}

impl AgentContext {
    /// Context at `t = 0` with zero past inputs; `y_noisy` starts as the
    /// noiseless prediction `C x̂`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: usize,
        state: Vec<f64>,
        initial_rows: Vec<Vec<f64>>,
        kalman: KalmanSchedule,
        gossip: GossipMatrix,
        phi_s: Formula,
        phi_i: Formula,
        preds: PredicateTable,
        noise: NoiseSpec,
        dynamics: LinearDynamics,
        error_params: ErrorBoundParams,
        cfg: RhcConfig,
    ) -> Result<Self, RhcError> {
        cfg.validate()?;
        let n = dynamics.agents();
        let d = dynamics.dims;
        if initial_rows.len() != n || initial_rows.iter().any(|r| r.len() != d) || state.len() != d {
            return Err(RhcError::Config(format!("initial estimates must be {n} rows of {d} values")));
        }
        if id >= n {
            return Err(RhcError::Config(format!("agent {} of {n}", id + 1)));
        }
        if gossip.v.nrows() != n || kalman.covariances()[0].nrows() != n {
            return Err(RhcError::Config("gossip or filter matrices do not match the agent count".into()));
        }
        phi_s.check(&preds, d)?;
        phi_i.check(&preds, d)?;
        let y_noisy = initial_rows
            .iter()
            .enumerate()
            .map(|(l, r)| dynamics.output(r, l))
            .collect();
        Ok(Self {
            id,
            state,
            xhat: initial_rows.clone(),
            zeta: initial_rows,
            y_noisy,
            u_prev: vec![vec![0.0; d]; n],
            u_prev2: vec![vec![0.0; d]; n],
            kalman,
            gossip,
            phi_s,
            phi_i,
            preds,
            noise,
            dynamics,
            error_params,
            cfg,
            eps: Vec::new(),
        })
    }

    /// Error bounds `ε_0 ..= ε_{last}`.
    pub fn error_bounds(&mut self, last: usize) -> &[f64] {
        if self.eps.len() <= last {
            self.eps = error_bound_trace((last + 1).max(2 * self.eps.len()), &self.error_params);
        }
        &self.eps
    }
}

/// Inputs planned by one agent for every agent, with diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPlan {
    pub t: usize,
    /// `inputs[m][l]` is the input of agent `l` at time `t + m`.
    pub inputs: Vec<Vec<Vec<f64>>>,
    /// Planned own states for `t ..= t + inputs.len()`.
    pub own_states: Vec<Vec<f64>>,
    /// Planned own row of the system-average estimate, same times.
    pub zeta_own: Vec<Vec<f64>>,
    pub objective: f64,
    /// Re-evaluated robustness of the agent specification at `t + j`.
    pub rho_agent: Vec<f64>,
    /// Re-evaluated robustness of the system specification at `t + j`.
    pub rho_system: Vec<f64>,
    pub system_threshold: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Wall-clock time of assembly and solve.
    pub solve_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Planned(ControlPlan),
    /// No plan satisfies the constraints; the loop stops here.
    Infeasible(String),
}

/// One-step prediction of the noisy outputs:
/// `ỹ = C(x̂ + u) + (CBA/2)(u - u_prev)`, per agent and coordinate.
pub fn predict_output(
    xhat: &[Vec<f64>],
    u: &[Vec<f64>],
    u_prev: &[Vec<f64>],
    dynamics: &LinearDynamics,
) -> Vec<Vec<f64>> {
    xhat.iter()
        .enumerate()
        .map(|(l, row)| {
            let (a, b, c) = (dynamics.a[l], dynamics.b[l], dynamics.c[l]);
            row.iter()
                .enumerate()
                .map(|(d, x)| c * (x + u[l][d]) + 0.5 * c * b * a * (u[l][d] - u_prev[l][d]))
                .collect()
        })
        .collect()
}

/// Builds and solves the Diff-MILP at `t`, then re-checks the planned
/// robustness on the plan itself.
pub fn rhc_step(ctx: &mut AgentContext, t: usize) -> Result<StepOutcome, RhcError> {
    let clock = Instant::now();
    let dm = match assemble_diff_milp(ctx, t) {
        Ok(dm) => dm,
        Err(RhcError::Encode(e @ EncodeError::Unreachable { .. })) => {
            return Ok(StepOutcome::Infeasible(format!("agent {} at step {t}: {e}", ctx.id + 1)));
        }
        Err(e) => return Err(e),
    };
    if dm.trivially_infeasible {
        return Ok(StepOutcome::Infeasible(format!(
            "agent {} at step {t}: a specification is violated by the fixed current values",
            ctx.id + 1
        )));
    }
    let sol = solve_milp(&dm.model, &ctx.cfg.solver).map_err(|source| RhcError::Solver { step: t, source })?;
    match sol.status {
        Status::Optimal => {}
        Status::Infeasible => {
            return Ok(StepOutcome::Infeasible(format!("agent {} at step {t}: Diff-MILP infeasible", ctx.id + 1)));
        }
        Status::Unbounded => {
            return Err(RhcError::Solver {
                step: t,
                source: SolveError::InvalidModel("unbounded Diff-MILP".into()),
            })
        }
    }
    let inputs: Vec<Vec<Vec<f64>>> = dm
        .inputs
        .iter()
        .map(|step| {
            step.iter()
                .map(|row| row.iter().map(|e| sol.eval(e).clamp(ctx.dynamics.u_min, ctx.dynamics.u_max)).collect())
                .collect()
        })
        .collect();
    let own_states = dm.own_states.eval(&sol.values);
    let zeta_own = dm.zeta_own.eval(&sol.values);
    let h = ctx.cfg.horizon;
    let own_traj = Trajectory::new(own_states.clone())?;
    let zeta_traj = Trajectory::new(zeta_own.clone())?;
    let mut rho_agent = Vec::with_capacity(h);
    let mut rho_system = Vec::with_capacity(h);
    for j in 0..h {
        let ra = robustness(&own_traj, &ctx.phi_i, j, &ctx.preds)?;
        if ra < ctx.cfg.r_min[j] - POST_CHECK_TOL {
            return Err(RhcError::PostCheck {
                step: t,
                which: "agent",
                j,
                got: ra,
                need: ctx.cfg.r_min[j],
            });
        }
        let rs = robustness(&zeta_traj, &ctx.phi_s, j, &ctx.preds)?;
        if rs < dm.system_threshold - POST_CHECK_TOL {
            return Err(RhcError::PostCheck {
                step: t,
                which: "system",
                j,
                got: rs,
                need: dm.system_threshold,
            });
        }
        rho_agent.push(ra);
        rho_system.push(rs);
    }
    Ok(StepOutcome::Planned(ControlPlan {
        t,
        inputs,
        own_states,
        zeta_own,
        objective: sol.objective.max(0.0),
        rho_agent,
        rho_system,
        system_threshold: dm.system_threshold,
        nodes: sol.stats.nodes,
        lp_iterations: sol.stats.lp_iterations,
        solve_seconds: clock.elapsed().as_secs_f64(),
    }))
}
