//! Seeded generators of predicates, formulas and trajectories.
#![allow(dead_code)]

use dprhc::mtl::{Formula, Halfspace, Predicate, PredicateTable, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Three boxes and one random halfspace region in `dims` dimensions.
pub fn random_table(r: &mut ChaCha8Rng, dims: usize) -> PredicateTable {
    let mut t = PredicateTable::new();
    for name in ["p", "q", "w"] {
        let lo: Vec<f64> = (0..dims).map(|_| r.random_range(-12.0..4.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + r.random_range(1.0..16.0)).collect();
        t.insert(Predicate::boxed(name, &lo, &hi).unwrap());
    }
    let faces = (0..r.random_range(1..=3))
        .map(|_| {
            let mut normal: Vec<f64> = (0..dims).map(|_| r.random_range(-2.0..2.0)).collect();
            if normal.iter().all(|v: &f64| v.abs() < 0.1) {
                normal[0] = 1.0;
            }
            Halfspace {
                normal,
                offset: r.random_range(-5.0..8.0),
            }
        })
        .collect();
    t.insert(Predicate::new("h", faces).unwrap());
    t
}

/// Formula of depth at most `depth` whose horizon stays within `budget`.
pub fn random_formula(r: &mut ChaCha8Rng, depth: usize, budget: usize) -> Formula {
    let atoms = ["p", "q", "w", "h"];
    if depth == 0 || r.random_bool(0.2) {
        return Formula::atom(atoms[r.random_range(0..atoms.len())]);
    }
    let interval = |r: &mut ChaCha8Rng| {
        let b = r.random_range(0..=budget);
        (r.random_range(0..=b), b)
    };
    match r.random_range(0..6) {
        0 => Formula::not(random_formula(r, depth - 1, budget)),
        1 => Formula::and(random_formula(r, depth - 1, budget), random_formula(r, depth - 1, budget)),
        2 => Formula::or(random_formula(r, depth - 1, budget), random_formula(r, depth - 1, budget)),
        3 => {
            let (a, b) = interval(r);
            Formula::eventually(a, b, random_formula(r, depth - 1, budget - b))
        }
        4 => {
            let (a, b) = interval(r);
            Formula::globally(a, b, random_formula(r, depth - 1, budget - b))
        }
        _ => {
            let (a, b) = interval(r);
            Formula::until(
                a,
                b,
                random_formula(r, depth - 1, budget - b),
                random_formula(r, depth - 1, budget - b),
            )
        }
    }
}

pub fn random_trajectory(r: &mut ChaCha8Rng, len: usize, dims: usize) -> Trajectory {
    Trajectory::new(
        (0..len)
            .map(|_| (0..dims).map(|_| r.random_range(-20.0..20.0)).collect())
            .collect(),
    )
    .unwrap()
}

pub struct Instance {
    pub preds: PredicateTable,
    pub formula: Formula,
    pub traj: Trajectory,
    pub t: usize,
}

/// Depth <= 3, horizon <= `budget`, 1-2 dimensions.
pub fn random_instance(seed: u64, budget: usize) -> Instance {
    let mut r = rng(seed);
    let dims = r.random_range(1..=2);
    let preds = random_table(&mut r, dims);
    let formula = random_formula(&mut r, 3, budget);
    let t = r.random_range(0..3);
    let len = t + formula.horizon() + 1 + r.random_range(0..3);
    let traj = random_trajectory(&mut r, len, dims);
    Instance {
        preds,
        formula,
        traj,
        t,
    }
}

/// Minimum and maximum of the exactly encoded robustness over a model whose
/// samples are variables pinned to the trajectory.
pub fn milp_robustness_range(inst: &Instance) -> (f64, f64) {
    use dprhc::encode::{encode_robustness_expr, EncodingConfig, SignalTable};
    use milp::{solve_milp, Model, SolverOptions, Status};

    let mut model = Model::new();
    let sig = SignalTable::pinned_vars(&mut model, 0, inst.traj.samples());
    let cfg = EncodingConfig::default();
    let (e, _) = encode_robustness_expr(&inst.formula, &sig, inst.t, &mut model, &cfg, &inst.preds).unwrap();
    let opts = SolverOptions::default();
    model.set_objective(e.clone());
    let lo = solve_milp(&model, &opts).unwrap();
    model.set_objective(e.scaled(-1.0));
    let hi = solve_milp(&model, &opts).unwrap();
    assert_eq!((lo.status, hi.status), (Status::Optimal, Status::Optimal));
    (lo.eval(&e), hi.eval(&e))
}
