//! Random small MILPs and an enumeration oracle over their binaries.

use milp::{solve_lp, LinExpr, Model, Relation, SolverOptions, Status, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub model: Model,
    pub binaries: Vec<VarId>,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = rng.random_range(1..=12);
    let nc = rng.random_range(0..=10);
    let mut m = Model::new();
    let bins: Vec<_> = (0..nb).map(|i| m.add_binary(format!("b{i}"))).collect();
    let conts: Vec<_> = (0..nc)
        .map(|i| m.add_continuous(format!("x{i}"), -5.0, 5.0))
        .collect();
    let all: Vec<VarId> = bins.iter().chain(conts.iter()).copied().collect();
    // Anchor point with integral binaries keeps most instances feasible.
    let mut anchor: Vec<f64> = bins.iter().map(|_| rng.random_range(0..2) as f64).collect();
    anchor.extend(conts.iter().map(|_| rng.random_range(-4.0..4.0)));
    let rows = rng.random_range(1..=8);
    for _ in 0..rows {
        let mut e = LinExpr::zero();
        let mut act = 0.0;
        for (k, &v) in all.iter().enumerate() {
            if rng.random_bool(0.6) {
                let a = rng.random_range(-4.0..4.0f64).round();
                e.add_term(v, a);
                act += a * anchor[k];
            }
        }
        let slack = if rng.random_bool(0.1) {
            -rng.random_range(0.5..3.0)
        } else {
            rng.random_range(0.0..2.0)
        };
        match rng.random_range(0..3) {
            0 => m.add_constraint(e, Relation::Le, act + slack),
            1 => m.add_constraint(e, Relation::Ge, act - slack),
            _ => m.add_constraint(e, Relation::Eq, act),
        };
    }
    let mut obj = LinExpr::zero();
    for &v in &all {
        obj.add_term(v, rng.random_range(-3.0..3.0));
    }
    m.set_objective(obj);
    Instance {
        model: m,
        binaries: bins,
    }
}

pub fn brute_force(inst: &Instance) -> Option<f64> {
    let nb = inst.binaries.len();
    let opts = SolverOptions::default();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << nb) {
        let mut m = inst.model.clone();
        for (k, &b) in inst.binaries.iter().enumerate() {
            m.fix(b, ((mask >> k) & 1) as f64);
        }
        let s = solve_lp(&m, &opts).unwrap();
        if s.status == Status::Optimal {
            best = Some(best.map_or(s.objective, |b: f64| b.min(s.objective)));
        }
    }
    best
}
