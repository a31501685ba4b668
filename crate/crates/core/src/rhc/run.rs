use super::{predict_output, rhc_step, AgentContext, ControlPlan, RhcError, StepOutcome};
use crate::dynamics::{system_average, Graph};
use crate::estimation::{gossip_pair_update, kalman_update};

/// Source of the random events the agents do not control.
pub trait Environment {
    /// The active agent and the neighbour it talks to at step `t >= 1`.
    fn pair(&mut self, t: usize) -> (usize, usize);
    /// Privatised copy of the output `y` of agent `i` at step `t`.
    fn privatize(&mut self, i: usize, t: usize, y: &[f64]) -> Vec<f64>;
}

/// Realised values at one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    /// True states, one row per agent.
    pub states: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    /// Each agent's own estimate of the system average.
    pub zeta: Vec<Vec<f64>>,
    pub noisy_outputs: Vec<Vec<f64>>,
    /// Inputs applied at `t`; absent at the final step.
    pub inputs: Option<Vec<Vec<f64>>>,
    /// Active agent and partner; absent at `t = 0`.
    pub pair: Option<(usize, usize)>,
    /// Plans computed at `t`, one per agent.
    pub plans: Vec<ControlPlan>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    /// The loop reached `t = τ - H`.
    Horizon,
    Infeasible { step: usize, agent: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopOutput {
    pub records: Vec<StepRecord>,
    pub termination: Termination,
}

/// Runs every agent in lock step while `t < τ - H` and every Diff-MILP is
/// feasible.
///
/// At each step `t >= 1` one pair communicates: the active agent receives
/// its partner's noisy output, every other foreign output is predicted
/// from the agent's previous plan, and each agent filters its stacked
/// estimates. The gossip estimates are averaged over the pair and shifted
/// by each agent's own estimate increment; both members of the pair learn
/// the averaged rows, and every other row of an agent's gossip vector moves
/// with that agent's estimate increments. Each agent then plans, and the
/// plant advances with every agent's own first input.
pub fn agent_loop(
    ctxs: &mut [AgentContext],
    graph: &Graph,
    env: &mut dyn Environment,
    tau: usize,
) -> Result<LoopOutput, RhcError> {
    let n = ctxs.len();
    if n == 0 || graph.len() != n {
        return Err(RhcError::Config(format!("{n} contexts for a graph of {} agents", graph.len())));
    }
    let h = ctxs[0].cfg.horizon;
    if tau <= h {
        return Err(RhcError::Config(format!("tau = {tau} must exceed H = {h}")));
    }
    for (i, c) in ctxs.iter().enumerate() {
        if c.id != i {
            return Err(RhcError::Config(format!("context {} has id {}", i + 1, c.id + 1)));
        }
    }
    let dy = ctxs[0].dynamics.clone();
    let mut states: Vec<Vec<f64>> = ctxs.iter().map(|c| c.state.clone()).collect();
    let mut gossip: Vec<Vec<f64>> = ctxs.iter().map(|c| c.zeta[c.id].clone()).collect();
    let mut records = Vec::new();
    let mut t = 0usize;
    let termination = loop {
        let outputs: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let y = dy.output(&states[i], i);
                env.privatize(i, t, &y)
            })
            .collect();
        let mut pair = None;
        if t >= 1 {
            let (act, partner) = env.pair(t);
            pair = Some((act, partner));
            let mut own_now = Vec::with_capacity(n);
            let mut own_prev = Vec::with_capacity(n);
            for c in ctxs.iter_mut() {
                let i = c.id;
                let mut y = predict_output(&c.xhat, &c.u_prev, &c.u_prev2, &dy);
                y[i] = outputs[i].clone();
                if i == act {
                    y[partner] = outputs[partner].clone();
                }
                let k = c.kalman.gain(t)?.clone();
                let next = kalman_update(&c.xhat, &c.u_prev, &y, &k, &dy.a, &dy.b)?;
                own_now.push(next[i].clone());
                own_prev.push(c.xhat[i].clone());
                // rows the agent does not hear about only move with its estimates
                for (l, row) in c.zeta.iter_mut().enumerate() {
                    for (d, z) in row.iter_mut().enumerate() {
                        *z += next[l][d] - c.xhat[l][d];
                    }
                }
                c.xhat = next;
                c.y_noisy = y;
            }
            gossip = gossip_pair_update(&gossip, (act, partner), graph, &own_now, &own_prev)?;
            for c in ctxs.iter_mut() {
                c.zeta[c.id] = gossip[c.id].clone();
                if c.id == act || c.id == partner {
                    c.zeta[act] = gossip[act].clone();
                    c.zeta[partner] = gossip[partner].clone();
                }
            }
        }
        let mut rec = StepRecord {
            t,
            states: states.clone(),
            eta: system_average(&states),
            zeta: gossip.clone(),
            noisy_outputs: outputs,
            inputs: None,
            pair,
            plans: Vec::new(),
        };
        if t + h >= tau {
            records.push(rec);
            break Termination::Horizon;
        }
        let mut stop = None;
        for c in ctxs.iter_mut() {
            c.state = states[c.id].clone();
            match rhc_step(c, t)? {
                StepOutcome::Planned(p) => rec.plans.push(p),
                StepOutcome::Infeasible(reason) => {
                    stop = Some(Termination::Infeasible {
                        step: t,
                        agent: c.id,
                        reason,
                    });
                    break;
                }
            }
        }
        if let Some(s) = stop {
            records.push(rec);
            break s;
        }
        let applied: Vec<Vec<f64>> = rec.plans.iter().enumerate().map(|(i, p)| p.inputs[0][i].clone()).collect();
        for (i, u) in applied.iter().enumerate() {
            states[i] = dy.step_agent(&states[i], u, i)?;
        }
        for (c, p) in ctxs.iter_mut().zip(&rec.plans) {
            c.u_prev2 = std::mem::take(&mut c.u_prev);
            c.u_prev = p.inputs[0].clone();
            // the own row is what was actually applied
            c.u_prev[c.id] = applied[c.id].clone();
        }
        rec.inputs = Some(applied);
        records.push(rec);
        t += 1;
    };
    Ok(LoopOutput { records, termination })
}
