use dprhc::dynamics::{Graph, LinearDynamics};
use dprhc::estimation::{build_gossip_probabilities, expected_gossip_matrix, kalman_schedule, ErrorBoundParams};
use dprhc::mtl::{boolean_sat, parse, Formula, Halfspace, Predicate, PredicateTable, Trajectory};
use dprhc::privacy::NoiseSpec;
use dprhc::rhc::{
    agent_loop, assemble_diff_milp, rhc_step, AgentContext, DiffMilpForm, Environment, ObjectiveMode, RhcConfig,
    StepOutcome, Termination,
};
use milp::{solve_milp, SolverOptions, Status};
use nalgebra::DMatrix;

fn preds() -> PredicateTable {
    let mut t = PredicateTable::new();
    t.insert(Predicate::boxed("Near", &[-1.0, -1.0], &[1.0, 1.0]).unwrap());
    t.insert(Predicate::boxed("Far", &[40.0, 40.0], &[60.0, 60.0]).unwrap());
    t.insert(Predicate::boxed("Wide", &[-50.0, -50.0], &[50.0, 50.0]).unwrap());
    t.insert(
        Predicate::new(
            "Neg",
            vec![
                Halfspace {
                    normal: vec![1.0, 0.0],
                    offset: 0.0,
                },
                Halfspace {
                    normal: vec![0.0, 1.0],
                    offset: 0.0,
                },
            ],
        )
        .unwrap(),
    );
    t
}

/// Agents on a path graph with a = b = c = 0.1 and noiseless outputs.
fn contexts(phi_s: &Formula, phi_i: &[Formula], x0: &[Vec<f64>], cfg: RhcConfig) -> (Vec<AgentContext>, Graph) {
    let n = x0.len();
    let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let g = Graph::new(n, &edges).unwrap();
    let gossip = expected_gossip_matrix(&build_gossip_probabilities(&g).unwrap()).unwrap();
    let dy = LinearDynamics::new(vec![0.1; n], vec![0.1; n], vec![0.1; n], 2, -2.0, 2.0).unwrap();
    let ks = kalman_schedule(DMatrix::identity(n, n), DMatrix::identity(n, n), 0).unwrap();
    let eb = ErrorBoundParams {
        lambda: gossip.lambda2,
        l1: 0.01,
        l2: 0.01,
        zeta_max: 1.0,
        s_max: 1.0,
        v_max: 1.0,
        u_max: 2.0,
        n,
        multiplicative: false,
    };
    let ctxs = (0..n)
        .map(|i| {
            AgentContext::new(
                i,
                x0[i].clone(),
                x0.to_vec(),
                ks.clone(),
                gossip.clone(),
                phi_s.clone(),
                phi_i[i].clone(),
                preds(),
                NoiseSpec {
                    sigma: 0.0,
                    sensitivity: 0.0,
                },
                dy.clone(),
                eb.clone(),
                cfg.clone(),
            )
            .unwrap()
        })
        .collect();
    (ctxs, g)
}

struct Quiet;

impl Environment for Quiet {
    fn pair(&mut self, _t: usize) -> (usize, usize) {
        (0, 1)
    }

    fn privatize(&mut self, _i: usize, _t: usize, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }
}

#[test]
fn trivial_specs_give_zero_inputs() {
    let cfg = RhcConfig::constant(3, 0.1, 0.9);
    let x0 = vec![vec![5.0, -5.0], vec![1.0, 2.0]];
    let (mut ctxs, _) = contexts(&Formula::True, &[Formula::True, Formula::True], &x0, cfg);
    let dm = assemble_diff_milp(&mut ctxs[0], 0).unwrap();
    let sol = solve_milp(&dm.model, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert_eq!(sol.objective, 0.0);
    assert_eq!(dm.binaries, 0);
    for t in 0..2 {
        let StepOutcome::Planned(p) = rhc_step(&mut ctxs[0], t).unwrap() else { panic!("infeasible") };
        assert!(p.inputs.iter().flatten().flatten().all(|&u| u == 0.0));
        assert_eq!(p.objective, 0.0);
    }
}

#[test]
fn staying_in_a_box_is_cheap_and_rechecked() {
    let p = preds();
    let phi = parse("G[0,1](Near)", &p).unwrap();
    let cfg = RhcConfig::constant(2, 0.1, 0.9);
    let x0 = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
    let (mut ctxs, _) = contexts(&Formula::True, &[phi.clone(), phi.clone()], &x0, cfg);
    let StepOutcome::Planned(plan) = rhc_step(&mut ctxs[0], 0).unwrap() else { panic!("infeasible") };
    assert!(plan.objective < 1e-9);
    let traj = Trajectory::new(plan.own_states.clone()).unwrap();
    for j in 0..2 {
        assert!(plan.rho_agent[j] >= 0.1 - 1e-5);
        assert!(boolean_sat(&traj, &phi, j, &p).unwrap());
    }
}

#[test]
fn out_of_reach_region_is_infeasible() {
    // Steady states satisfy |x| <= 2/9, nowhere near the far box.
    let p = preds();
    let phi = parse("F[0,3](Far)", &p).unwrap();
    let cfg = RhcConfig::constant(2, 0.1, 0.9);
    let x0 = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
    let (mut ctxs, _) = contexts(&Formula::True, &[phi.clone(), Formula::True], &x0, cfg);
    match rhc_step(&mut ctxs[0], 0).unwrap() {
        StepOutcome::Infeasible(msg) => assert!(msg.contains("agent 1")),
        StepOutcome::Planned(_) => panic!("expected infeasibility"),
    }
}

#[test]
fn explicit_and_substituted_forms_agree() {
    let p = preds();
    let phi_s = parse("F[0,3](Wide)", &p).unwrap();
    let phis = [
        parse("F[1,3](Near) & G[0,4](Neg)", &p).unwrap(),
        parse("G[0,2](Wide) | F[0,2](Near)", &p).unwrap(),
        parse("(Wide U[0,3] Near)", &p).unwrap(),
    ];
    let x0 = vec![vec![-3.0, -4.0], vec![2.0, 30.0], vec![20.0, -1.0]];
    for obj in [ObjectiveMode::OneNorm, ObjectiveMode::InfNorm] {
        let mut objectives = Vec::new();
        for form in [DiffMilpForm::Substituted, DiffMilpForm::Explicit] {
            let mut cfg = RhcConfig::constant(3, 0.1, 0.9);
            cfg.form = form;
            cfg.objective = obj;
            let (mut ctxs, _) = contexts(&phi_s, &phis, &x0, cfg);
            let mut vals = Vec::new();
            for c in ctxs.iter_mut() {
                let StepOutcome::Planned(plan) = rhc_step(c, 0).unwrap() else { panic!("infeasible") };
                vals.push(plan.objective);
            }
            objectives.push(vals);
        }
        for (a, b) in objectives[0].iter().zip(&objectives[1]) {
            assert!((a - b).abs() < 1e-6, "{obj:?}: {a} vs {b}");
        }
    }
}

#[test]
fn one_iteration_when_tau_is_h_plus_one() {
    let cfg = RhcConfig::constant(3, 0.1, 0.9);
    let x0 = vec![vec![5.0, -5.0], vec![1.0, 2.0]];
    let (mut ctxs, g) = contexts(&Formula::True, &[Formula::True, Formula::True], &x0, cfg);
    let out = agent_loop(&mut ctxs, &g, &mut Quiet, 4).unwrap();
    assert_eq!(out.termination, Termination::Horizon);
    assert_eq!(out.records.iter().filter(|r| !r.plans.is_empty()).count(), 1);
}

#[test]
fn trivial_specs_follow_pure_decay() {
    let cfg = RhcConfig::constant(2, 0.1, 0.9);
    let x0 = vec![vec![100.0, -100.0], vec![-10.0, 1.0]];
    let (mut ctxs, g) = contexts(&Formula::True, &[Formula::True, Formula::True], &x0, cfg);
    let out = agent_loop(&mut ctxs, &g, &mut Quiet, 8).unwrap();
    for w in out.records.windows(2) {
        for i in 0..2 {
            for d in 0..2 {
                assert!((w[1].states[i][d] - 0.1 * w[0].states[i][d]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn infeasible_spec_stops_the_loop() {
    let p = preds();
    let far = parse("F[0,3](Far)", &p).unwrap();
    let cfg = RhcConfig::constant(2, 0.1, 0.9);
    let x0 = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
    let (mut ctxs, g) = contexts(&Formula::True, &[Formula::True, far], &x0, cfg);
    let out = agent_loop(&mut ctxs, &g, &mut Quiet, 10).unwrap();
    match out.termination {
        Termination::Infeasible { step, agent, .. } => assert_eq!((step, agent), (0, 1)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn noise_free_replanning_stays_feasible() {
    // Each new window is feasible after applying the first planned input.
    let p = preds();
    let phi_s = parse("F[0,4](Wide)", &p).unwrap();
    let phis = [
        parse("F[0,4](Near) & G[0,4](Neg)", &p).unwrap(),
        parse("F[0,4](Near)", &p).unwrap(),
    ];
    let cfg = RhcConfig::constant(4, 0.1, 0.9);
    let x0 = vec![vec![-30.0, -20.0], vec![10.0, 25.0]];
    let (mut ctxs, g) = contexts(&phi_s, &phis, &x0, cfg);
    let out = agent_loop(&mut ctxs, &g, &mut Quiet, 20).unwrap();
    assert_eq!(out.termination, Termination::Horizon);
    for r in &out.records {
        for (i, u) in r.inputs.iter().flatten().enumerate() {
            assert!(u.iter().all(|v| (-2.0..=2.0).contains(v)), "agent {i} input {u:?}");
        }
        for plan in &r.plans {
            assert!(plan.objective >= 0.0);
        }
    }
}
