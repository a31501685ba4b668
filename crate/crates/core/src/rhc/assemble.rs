use milp::{LinExpr, Model, Relation, VarId};

use super::{AgentContext, DiffMilpForm, ObjectiveMode, RhcError};
use crate::encode::{required_rmin, RequirementEncoder, SignalTable};

/// Number of planned inputs: the `2H` control horizon, stretched when the
/// specifications look further ahead than `H` steps past the last offset.
pub fn window_len(horizon: usize, spec_horizon: usize) -> usize {
    (2 * horizon).max(horizon - 1 + spec_horizon)
}

/// The assembled program with handles for reading a solution back.
#[derive(Clone, Debug)]
pub struct DiffMilp {
    pub model: Model,
    /// `inputs[m][l][d]` as an expression of the decision variables.
    pub inputs: Vec<Vec<Vec<LinExpr>>>,
    pub own_states: SignalTable,
    pub zeta_own: SignalTable,
    /// Threshold on the system specification, raised to meet the
    /// confidence targets.
    pub system_threshold: f64,
    pub binaries: usize,
    /// Some requirement already fails on fixed values.
    pub trivially_infeasible: bool,
}

fn constants(rows: &[Vec<f64>]) -> Vec<Vec<LinExpr>> {
    rows.iter()
        .map(|r| r.iter().map(|&v| LinExpr::constant(v)).collect())
        .collect()
}

/// Replaces `e` by a fresh free variable tied to it in the explicit form.
fn bind(model: &mut Model, form: DiffMilpForm, name: String, e: LinExpr) -> LinExpr {
    match form {
        DiffMilpForm::Substituted => e,
        DiffMilpForm::Explicit => {
            let v = model.add_free(name);
            model.add_constraint(LinExpr::var(v) - &e, Relation::Eq, 0.0);
            LinExpr::var(v)
        }
    }
}

/// Diff-MILP of agent `ctx.id` at time `t`.
///
/// Inputs of all agents over the window are the decisions. The own state,
/// the stacked state estimates, the predicted noisy outputs and the stacked
/// gossip estimates follow their recursions from the current values. The
/// agent specification must reach `r_min[j]` on the own state at `t + j`
/// and the system specification must reach
/// `max(r_min[j], required_rmin(...))` on the own gossip row, for `j < H`.
pub fn assemble_diff_milp(ctx: &mut AgentContext, t: usize) -> Result<DiffMilp, RhcError> {
    ctx.cfg.validate()?;
    let h = ctx.cfg.horizon;
    let form = ctx.cfg.form;
    let dy = ctx.dynamics.clone();
    let (n, dims, me) = (dy.agents(), dy.dims, ctx.id);
    let spec_h = ctx.phi_s.horizon().max(ctx.phi_i.horizon());
    let w = window_len(h, spec_h);

    // Confidence targets turn into a single threshold on the estimate so
    // that every offset shares one set of indicator binaries.
    let hs = ctx.phi_s.horizon();
    let mode = ctx.cfg.confidence;
    let gammas = ctx.cfg.gamma_min.clone();
    let eps = ctx.error_bounds(t + h - 1 + hs).to_vec();
    let mut system_threshold = 0.0f64;
    for (j, g) in gammas.iter().enumerate() {
        let r = required_rmin(&ctx.phi_s, &eps, *g, mode, t + j..=t + j)?;
        system_threshold = system_threshold.max(r).max(ctx.cfg.r_min[j]);
    }

    let mut model = Model::new();
    let mut inputs = Vec::with_capacity(w);
    let mut objective = LinExpr::zero();
    let (lo, hi) = (dy.u_min, dy.u_max);
    for m in 0..w {
        let mut step = Vec::with_capacity(n);
        let peak = match ctx.cfg.objective {
            ObjectiveMode::InfNorm => {
                let s = model.add_continuous(format!("peak_{m}"), 0.0, f64::INFINITY);
                objective.add_term(s, 1.0);
                Some(s)
            }
            ObjectiveMode::OneNorm => None,
        };
        for l in 0..n {
            let mut row = Vec::with_capacity(dims);
            for d in 0..dims {
                let p: VarId = model.add_continuous(format!("up_{m}_{l}_{d}"), 0.0, hi.max(0.0));
                let q: VarId = model.add_continuous(format!("um_{m}_{l}_{d}"), 0.0, (-lo).max(0.0));
                let u = LinExpr::var(p) - LinExpr::var(q);
                if lo > 0.0 {
                    model.add_constraint(u.clone(), Relation::Ge, lo);
                }
                if hi < 0.0 {
                    model.add_constraint(u.clone(), Relation::Le, hi);
                }
                let abs = LinExpr::var(p) + LinExpr::var(q);
                match peak {
                    Some(s) => {
                        model.add_constraint(LinExpr::var(s) - &abs, Relation::Ge, 0.0);
                    }
                    None => objective += &abs,
                }
                row.push(u);
            }
            step.push(row);
        }
        inputs.push(step);
    }
    model.set_objective(objective);

    let gains: Vec<_> = (0..w)
        .map(|m| ctx.kalman.gain(t + m + 1).cloned())
        .collect::<Result<_, _>>()?;
    let v = &ctx.gossip.v;

    let mut own = vec![ctx.state.iter().map(|&x| LinExpr::constant(x)).collect::<Vec<_>>()];
    let mut xhat = constants(&ctx.xhat);
    let mut zeta = constants(&ctx.zeta);
    let mut zeta_own = vec![zeta[me].clone()];
    let prev_inputs = constants(&ctx.u_prev);
    for m in 0..w {
        let u = &inputs[m];
        let u_before = if m == 0 { &prev_inputs } else { &inputs[m - 1] };
        let k = &gains[m];

        let mut next_own = Vec::with_capacity(dims);
        for d in 0..dims {
            let mut e = own[m][d].scaled(dy.a[me]);
            e.add_scaled(&u[me][d], dy.b[me]);
            next_own.push(bind(&mut model, form, format!("x_{}_{d}", m + 1), e));
        }
        own.push(next_own);

        // predicted outputs and the innovation of the filter, per agent
        let mut innovation = Vec::with_capacity(n);
        let mut predicted = Vec::with_capacity(n);
        for l in 0..n {
            let (a, b, c) = (dy.a[l], dy.b[l], dy.c[l]);
            let mut inn_row = Vec::with_capacity(dims);
            let mut pred_row = Vec::with_capacity(dims);
            for d in 0..dims {
                let mut pred = xhat[l][d].scaled(a);
                pred.add_scaled(&u[l][d], b);
                let mut y = xhat[l][d].scaled(c);
                y.add_scaled(&u[l][d], c);
                y.add_scaled(&u[l][d], 0.5 * c * b * a);
                y.add_scaled(&u_before[l][d], -0.5 * c * b * a);
                let y = bind(&mut model, form, format!("y_{}_{l}_{d}", m + 1), y);
                inn_row.push(y - &pred);
                pred_row.push(pred);
            }
            innovation.push(inn_row);
            predicted.push(pred_row);
        }
        let mut next_xhat = Vec::with_capacity(n);
        for l in 0..n {
            let mut row = Vec::with_capacity(dims);
            for d in 0..dims {
                let mut e = predicted[l][d].clone();
                for q in 0..n {
                    e.add_scaled(&innovation[q][d], k[(l, q)]);
                }
                row.push(bind(&mut model, form, format!("xh_{}_{l}_{d}", m + 1), e));
            }
            next_xhat.push(row);
        }
        let mut next_zeta = Vec::with_capacity(n);
        for l in 0..n {
            let mut row = Vec::with_capacity(dims);
            for d in 0..dims {
                let mut e = next_xhat[l][d].clone() - &xhat[l][d];
                for q in 0..n {
                    e.add_scaled(&zeta[q][d], v[(l, q)]);
                }
                row.push(bind(&mut model, form, format!("z_{}_{l}_{d}", m + 1), e));
            }
            next_zeta.push(row);
        }
        xhat = next_xhat;
        zeta = next_zeta;
        zeta_own.push(zeta[me].clone());
    }

    let own_states = SignalTable::new(t, own);
    let zeta_own = SignalTable::new(t, zeta_own);
    let mut enc = RequirementEncoder::new(&ctx.preds, ctx.cfg.big_m);
    for j in 0..h {
        enc.require(&mut model, &own_states, &ctx.phi_i, t + j, ctx.cfg.r_min[j])?;
        enc.require(&mut model, &zeta_own, &ctx.phi_s, t + j, system_threshold)?;
    }
    let binaries = enc.binaries();
    let trivially_infeasible = enc.trivially_infeasible();
    Ok(DiffMilp {
        model,
        inputs,
        own_states,
        zeta_own,
        system_threshold,
        binaries,
        trivially_infeasible,
    })
}
