//! Best-first branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::model::{Model, VarKind};
use crate::simplex::solve_relaxation;
use crate::{check_feasible, Solution, SolveError, SolveStats, SolverOptions, Status};

struct Node {
    /// Parent relaxation bound (lazy evaluation: the node's own LP is
    /// solved when it is popped).
    bound: f64,
    depth: usize,
    /// Up-branches are explored before down-branches on equal bound/depth.
    up: bool,
    seq: usize,
    fixes: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: "greater" means explored first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(self.up.cmp(&other.up))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Solves `model` to optimality with binaries restricted to {0, 1}.
///
/// Branches on the most fractional binary (lowest index on ties); nodes are
/// explored lowest bound first, deeper nodes first on equal bounds.
pub fn solve_milp(model: &Model, opts: &SolverOptions) -> Result<Solution, SolveError> {
    model.validate()?;
    let base_lo: Vec<f64> = model.vars().iter().map(|v| v.lower).collect();
    let base_up: Vec<f64> = model.vars().iter().map(|v| v.upper).collect();
    let binaries: Vec<usize> = model
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();

    let mut stats = SolveStats::default();
    let mut incumbent: Option<Solution> = None;
    let mut root_status = None;
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        up: false,
        seq,
        fixes: Vec::new(),
    });

    let mut lo = base_lo.clone();
    let mut hi = base_up.clone();

    while let Some(node) = heap.pop() {
        if let Some(inc) = &incumbent {
            if node.bound >= inc.objective - opts.objective_tol {
                continue;
            }
        }
        if stats.nodes >= opts.node_limit {
            return Err(SolveError::NodeLimit {
                limit: opts.node_limit,
                incumbent: incumbent.map(Box::new),
            });
        }
        stats.nodes += 1;

        lo.copy_from_slice(&base_lo);
        hi.copy_from_slice(&base_up);
        for &(j, v) in &node.fixes {
            lo[j] = v;
            hi[j] = v;
        }
        let lp = solve_relaxation(model, &lo, &hi, opts)?;
        stats.lp_iterations += lp.iterations;
        if root_status.is_none() {
            root_status = Some(lp.status);
        }
        match lp.status {
            Status::Infeasible => continue,
            Status::Unbounded => {
                return Ok(Solution {
                    status: Status::Unbounded,
                    values: Vec::new(),
                    objective: f64::NEG_INFINITY,
                    stats,
                })
            }
            Status::Optimal => {}
        }
        if let Some(inc) = &incumbent {
            if lp.objective >= inc.objective - opts.objective_tol {
                continue;
            }
        }

        // Most fractional binary, lowest index on ties.
        let mut branch_on: Option<(usize, f64)> = None;
        let mut best_frac = opts.integrality_tol;
        for &j in &binaries {
            let v = lp.values[j];
            let frac = (v - v.round()).abs();
            if frac > best_frac + 1e-12 {
                best_frac = frac;
                branch_on = Some((j, v));
            }
        }

        match branch_on {
            None => {
                let mut values = lp.values;
                for &j in &binaries {
                    values[j] = values[j].round();
                }
                let objective = model.objective().eval(&values);
                incumbent = Some(Solution {
                    status: Status::Optimal,
                    values,
                    objective,
                    stats,
                });
            }
            Some((j, _)) => {
                for (val, up) in [(0.0, false), (1.0, true)] {
                    seq += 1;
                    let mut fixes = node.fixes.clone();
                    fixes.push((j, val));
                    heap.push(Node {
                        bound: lp.objective,
                        depth: node.depth + 1,
                        up,
                        seq,
                        fixes,
                    });
                }
            }
        }
    }

    match incumbent {
        Some(mut sol) => {
            sol.stats = stats;
            check_feasible(model, &sol, opts)?;
            Ok(sol)
        }
        None => Ok(Solution {
            status: match root_status {
                Some(Status::Unbounded) => Status::Unbounded,
                _ => Status::Infeasible,
            },
            values: Vec::new(),
            objective: f64::INFINITY,
            stats,
        }),
    }
}
