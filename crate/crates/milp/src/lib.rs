//! Mixed 0/1 linear programming for small dense models.
//!
//! [`solve_lp`] runs a two-phase bounded-variable simplex on the continuous
//! relaxation; [`solve_milp`] wraps it in best-first branch-and-bound over
//! the binary variables. Models are expected to be small (hundreds of rows
//! and columns), so everything is dense.

mod branch;
mod lp_format;
mod model;
mod simplex;

pub use branch::solve_milp;
pub use lp_format::write_lp;
pub use model::{Constraint, LinExpr, Model, Relation, VarId, VarKind, Variable};

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: usize,
    pub lp_iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// One value per model variable; empty unless `status` is optimal.
    pub values: Vec<f64>,
    pub objective: f64,
    pub stats: SolveStats,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.index()]
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        e.eval(&self.values)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub objective_tol: f64,
    pub node_limit: usize,
    /// Per-LP pivot cap; `None` picks a size-dependent default.
    pub lp_iteration_limit: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            integrality_tol: 1e-6,
            objective_tol: 1e-6,
            node_limit: 200_000,
            lp_iteration_limit: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("numerical instability: {0}")]
    NumericalInstability(String),
    #[error("simplex iteration limit reached after {0} pivots")]
    IterationLimit(usize),
    #[error("branch-and-bound node limit of {limit} reached")]
    NodeLimit {
        limit: usize,
        /// Best integer-feasible solution found before the limit, if any.
        incumbent: Option<Box<Solution>>,
    },
}

/// Solves the continuous relaxation (binaries treated as `[0, 1]`).
pub fn solve_lp(model: &Model, opts: &SolverOptions) -> Result<Solution, SolveError> {
    model.validate()?;
    let lower: Vec<f64> = model.vars().iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.vars().iter().map(|v| v.upper).collect();
    let out = simplex::solve_relaxation(model, &lower, &upper, opts)?;
    let sol = Solution {
        status: out.status,
        values: out.values,
        objective: out.objective,
        stats: SolveStats {
            nodes: 1,
            lp_iterations: out.iterations,
        },
    };
    check_feasible(model, &sol, opts)?;
    Ok(sol)
}

pub(crate) fn check_feasible(
    model: &Model,
    sol: &Solution,
    opts: &SolverOptions,
) -> Result<(), SolveError> {
    if sol.status != Status::Optimal {
        return Ok(());
    }
    // Rows are checked relative to their magnitude so big-M rows are not
    // held to an absolute tolerance they cannot meet in floating point.
    for (r, c) in model.constraints().iter().enumerate() {
        let scale = c
            .expr
            .terms()
            .iter()
            .map(|&(v, a)| (a * sol.values[v.index()]).abs())
            .fold(c.rhs.abs().max(1.0), f64::max);
        let viol = c.violation(&sol.values);
        if viol > opts.feasibility_tol * scale * 10.0 {
            return Err(SolveError::NumericalInstability(format!(
                "row {r} violated by {viol:e} at the reported optimum"
            )));
        }
    }
    Ok(())
}
