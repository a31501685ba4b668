//! Dense bounded-variable primal simplex.
//!
//! Every row `a.x (rel) b` receives a slack `s` so that `a.x + s = b`, with
//! the slack bounds encoding the relation (`<=`: s >= 0, `>=`: s <= 0,
//! `=`: s = 0). Variable bounds are handled implicitly: a nonbasic column
//! sits at its lower bound, its upper bound, or at zero when free. Rows whose
//! slack cannot absorb the initial residual get an artificial column, and
//! phase one minimizes the sum of artificials.

use crate::model::Model;
use crate::{SolveError, SolverOptions, Status};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const GROWTH_LIMIT: f64 = 1e13;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_SWITCH: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ColState {
    Basic,
    AtLower,
    AtUpper,
    /// Free nonbasic column parked at zero.
    Zero,
}

/// Result of one LP relaxation solve.
#[derive(Clone, Debug)]
pub(crate) struct LpOutcome {
    pub status: Status,
    /// Structural variable values (empty unless optimal).
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

struct Tableau {
    m: usize,
    ncol: usize,
    /// Row-major `m x ncol`; row r expresses basic column `basis[r]` as
    /// `x_B + sum_j tab[r][j] x_j = const`.
    tab: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<ColState>,
    x: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    iterations: usize,
    iteration_limit: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn row(&self, r: usize) -> &[f64] {
        &self.tab[r * self.ncol..(r + 1) * self.ncol]
    }

    #[inline]
    fn at(&self, r: usize, j: usize) -> f64 {
        self.tab[r * self.ncol + j]
    }

    fn recompute_reduced_costs(&mut self) {
        self.d.copy_from_slice(&self.cost);
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.tab[r * self.ncol..(r + 1) * self.ncol];
            for (dj, &t) in self.d.iter_mut().zip(row) {
                *dj -= cb * t;
            }
        }
        for r in 0..self.m {
            self.d[self.basis[r]] = 0.0;
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncol {
            let st = self.state[j];
            if st == ColState::Basic || self.lo[j] == self.up[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = if dj < -COST_TOL && (st == ColState::AtLower || st == ColState::Zero) {
                1.0
            } else if dj > COST_TOL && (st == ColState::AtUpper || st == ColState::Zero) {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let ncol = self.ncol;
        let piv = self.tab[r * ncol + j];
        let inv = 1.0 / piv;
        {
            let row = &mut self.tab[r * ncol..(r + 1) * ncol];
            for v in row.iter_mut() {
                *v *= inv;
            }
            row[j] = 1.0;
        }
        let (before, rest) = self.tab.split_at_mut(r * ncol);
        let (prow, after) = rest.split_at_mut(ncol);
        for other in before
            .chunks_exact_mut(ncol)
            .chain(after.chunks_exact_mut(ncol))
        {
            let f = other[j];
            if f == 0.0 {
                continue;
            }
            for (o, &p) in other.iter_mut().zip(prow.iter()) {
                *o -= f * p;
            }
            other[j] = 0.0;
        }
        let dj = self.d[j];
        if dj != 0.0 {
            for (dv, &p) in self.d.iter_mut().zip(prow.iter()) {
                *dv -= dj * p;
            }
            self.d[j] = 0.0;
        }
        self.basis[r] = j;
    }

    fn run(&mut self) -> Result<PhaseEnd, SolveError> {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.iteration_limit {
                return Err(SolveError::IterationLimit(self.iterations));
            }
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let Some((j, dir)) = self.choose_entering(bland) else {
                return Ok(PhaseEnd::Optimal);
            };
            self.iterations += 1;

            // Ratio test. The basic variable in row r moves by -tab[r][j]*dir*theta.
            let mut theta = self.up[j] - self.lo[j];
            if !theta.is_finite() {
                theta = f64::INFINITY;
            }
            let mut leave: Option<(usize, f64, bool)> = None; // (row, |alpha|, hits upper)
            for r in 0..self.m {
                let alpha = self.at(r, j) * dir;
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[r];
                let (lim, hits_upper) = if alpha > 0.0 {
                    if self.lo[b] == f64::NEG_INFINITY {
                        continue;
                    }
                    (((self.x[b] - self.lo[b]) / alpha).max(0.0), false)
                } else {
                    if self.up[b] == f64::INFINITY {
                        continue;
                    }
                    (((self.up[b] - self.x[b]) / -alpha).max(0.0), true)
                };
                let better = match leave {
                    None => lim < theta,
                    Some((lr, la, _)) => {
                        if lim < theta - 1e-12 {
                            true
                        } else if lim <= theta + 1e-12 {
                            if bland {
                                b < self.basis[lr]
                            } else {
                                alpha.abs() > la || (alpha.abs() == la && b < self.basis[lr])
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = theta.min(lim);
                    leave = Some((r, alpha.abs(), hits_upper));
                }
            }
            if theta == f64::INFINITY {
                return Ok(PhaseEnd::Unbounded);
            }

            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            // Move the entering column and update basics.
            if theta > 0.0 {
                let step = dir * theta;
                self.x[j] += step;
                for r in 0..self.m {
                    let t = self.at(r, j);
                    if t != 0.0 {
                        let b = self.basis[r];
                        self.x[b] -= t * step;
                    }
                }
            }

            match leave {
                None => {
                    // Bound flip.
                    if dir > 0.0 {
                        self.x[j] = self.up[j];
                        self.state[j] = ColState::AtUpper;
                    } else {
                        self.x[j] = self.lo[j];
                        self.state[j] = ColState::AtLower;
                    }
                }
                Some((r, _, hits_upper)) => {
                    let b = self.basis[r];
                    if hits_upper {
                        self.x[b] = self.up[b];
                        self.state[b] = ColState::AtUpper;
                    } else {
                        self.x[b] = self.lo[b];
                        self.state[b] = ColState::AtLower;
                    }
                    self.state[j] = ColState::Basic;
                    self.pivot(r, j);
                    if self.row(r).iter().any(|v| v.abs() > GROWTH_LIMIT) {
                        return Err(SolveError::NumericalInstability(format!(
                            "tableau entry growth beyond {GROWTH_LIMIT:e} after pivot on column {j}"
                        )));
                    }
                }
            }
        }
    }
}

/// Solves the LP relaxation of `model` with the given bound overrides.
pub(crate) fn solve_relaxation(
    model: &Model,
    lower: &[f64],
    upper: &[f64],
    opts: &SolverOptions,
) -> Result<LpOutcome, SolveError> {
    let n = model.num_vars();
    let rows = model.constraints();
    let m = rows.len();

    // Fast path for bound-only models.
    if lower.iter().zip(upper).any(|(l, u)| l > &(u + opts.feasibility_tol)) {
        return Ok(LpOutcome {
            status: Status::Infeasible,
            values: Vec::new(),
            objective: f64::INFINITY,
            iterations: 0,
        });
    }

    // Initial nonbasic values for structurals.
    let mut x0 = vec![0.0; n];
    let mut st0 = vec![ColState::Zero; n];
    for j in 0..n {
        if lower[j].is_finite() {
            x0[j] = lower[j];
            st0[j] = ColState::AtLower;
        } else if upper[j].is_finite() {
            x0[j] = upper[j];
            st0[j] = ColState::AtUpper;
        }
    }

    // Decide which rows need an artificial.
    let mut residual = vec![0.0; m];
    let mut needs_art = vec![0.0f64; m]; // sign of the artificial column, 0 if none
    let mut slack_lo = vec![0.0; m];
    let mut slack_up = vec![0.0; m];
    for (r, c) in rows.iter().enumerate() {
        let act: f64 = c.expr.terms().iter().map(|&(v, a)| a * x0[v.0]).sum();
        residual[r] = c.rhs - act;
        let (sl, su) = match c.relation {
            crate::Relation::Le => (0.0, f64::INFINITY),
            crate::Relation::Ge => (f64::NEG_INFINITY, 0.0),
            crate::Relation::Eq => (0.0, 0.0),
        };
        slack_lo[r] = sl;
        slack_up[r] = su;
        if residual[r] < sl - opts.feasibility_tol * 0.1 || residual[r] > su + opts.feasibility_tol * 0.1 {
            needs_art[r] = if residual[r] > su { 1.0 } else { -1.0 };
        }
    }
    let art_rows: Vec<usize> = (0..m).filter(|&r| needs_art[r] != 0.0).collect();
    let na = art_rows.len();
    let ncol = n + m + na;

    let mut t = Tableau {
        m,
        ncol,
        tab: vec![0.0; m * ncol],
        basis: vec![0; m],
        state: vec![ColState::AtLower; ncol],
        x: vec![0.0; ncol],
        lo: vec![0.0; ncol],
        up: vec![0.0; ncol],
        cost: vec![0.0; ncol],
        d: vec![0.0; ncol],
        iterations: 0,
        iteration_limit: opts
            .lp_iteration_limit
            .unwrap_or(50 * (m + n) + 10_000),
    };
    t.lo[..n].copy_from_slice(lower);
    t.up[..n].copy_from_slice(upper);
    t.x[..n].copy_from_slice(&x0);
    t.state[..n].copy_from_slice(&st0);
    for r in 0..m {
        t.lo[n + r] = slack_lo[r];
        t.up[n + r] = slack_up[r];
    }

    let mut art_index = 0;
    for (r, c) in rows.iter().enumerate() {
        let base = r * ncol;
        for &(v, a) in c.expr.terms() {
            t.tab[base + v.0] += a;
        }
        t.tab[base + n + r] = 1.0;
        if needs_art[r] != 0.0 {
            let aj = n + m + art_index;
            art_index += 1;
            let sign = needs_art[r];
            // Slack parks at its nearest bound; artificial absorbs the rest.
            let s = residual[r].clamp(slack_lo[r], slack_up[r]);
            t.x[n + r] = s;
            t.state[n + r] = if s == slack_lo[r] {
                ColState::AtLower
            } else {
                ColState::AtUpper
            };
            t.tab[base + aj] = sign;
            t.lo[aj] = 0.0;
            t.up[aj] = f64::INFINITY;
            t.x[aj] = (residual[r] - s) * sign;
            // Normalize so the artificial has coefficient one.
            if sign < 0.0 {
                for v in &mut t.tab[base..base + ncol] {
                    *v = -*v;
                }
            }
            t.basis[r] = aj;
            t.state[aj] = ColState::Basic;
        } else {
            t.x[n + r] = residual[r];
            t.basis[r] = n + r;
            t.state[n + r] = ColState::Basic;
        }
    }
    // The tableau stores B^-1 A for nonbasic columns; basic columns are unit.
    // With slack or artificial bases, rows already satisfy this.

    if na > 0 {
        for aj in n + m..ncol {
            t.cost[aj] = 1.0;
        }
        t.recompute_reduced_costs();
        match t.run()? {
            PhaseEnd::Unbounded => {
                return Err(SolveError::NumericalInstability(
                    "phase one reported unbounded".into(),
                ))
            }
            PhaseEnd::Optimal => {}
        }
        let infeas: f64 = (n + m..ncol).map(|aj| t.x[aj]).sum();
        if infeas > opts.feasibility_tol {
            return Ok(LpOutcome {
                status: Status::Infeasible,
                values: Vec::new(),
                objective: f64::INFINITY,
                iterations: t.iterations,
            });
        }
        // Drive remaining artificials out of the basis where possible.
        for r in 0..m {
            let b = t.basis[r];
            if b < n + m {
                continue;
            }
            let pick = (0..n + m)
                .filter(|&j| t.state[j] != ColState::Basic && t.lo[j] != t.up[j])
                .find(|&j| t.at(r, j).abs() > 1e-7)
                .or_else(|| {
                    (0..n + m)
                        .filter(|&j| t.state[j] != ColState::Basic)
                        .find(|&j| t.at(r, j).abs() > 1e-7)
                });
            if let Some(j) = pick {
                t.x[b] = 0.0;
                t.state[b] = ColState::AtLower;
                t.state[j] = ColState::Basic;
                t.pivot(r, j);
            }
        }
        for aj in n + m..ncol {
            t.cost[aj] = 0.0;
            t.up[aj] = 0.0;
            if t.state[aj] != ColState::Basic {
                t.x[aj] = 0.0;
                t.state[aj] = ColState::AtLower;
            }
        }
    }

    let obj = model.objective();
    for &(v, c) in obj.terms() {
        t.cost[v.0] = c;
    }
    t.recompute_reduced_costs();
    match t.run()? {
        PhaseEnd::Unbounded => Ok(LpOutcome {
            status: Status::Unbounded,
            values: Vec::new(),
            objective: f64::NEG_INFINITY,
            iterations: t.iterations,
        }),
        PhaseEnd::Optimal => {
            let mut values = t.x[..n].to_vec();
            for j in 0..n {
                values[j] = values[j].clamp(lower[j], upper[j]);
            }
            let objective = obj.eval(&values);
            Ok(LpOutcome {
                status: Status::Optimal,
                values,
                objective,
                iterations: t.iterations,
            })
        }
    }
}
