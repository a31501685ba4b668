use dprhc::dynamics::{system_average, Graph, LinearDynamics};
use proptest::prelude::*;

fn dy() -> LinearDynamics {
    LinearDynamics::new(vec![0.1, 0.9, -0.5], vec![0.1, 1.0, 2.0], vec![0.1, 1.0, 0.3], 2, -2.0, 2.0).unwrap()
}

fn vec2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 2)
}

fn input() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 2)
}

proptest! {
    #[test]
    fn step_is_linear(i in 0usize..3, x1 in vec2(), x2 in vec2(), u1 in input(), u2 in input(), k in -1.0f64..1.0) {
        let d = dy();
        let x: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + k * b).collect();
        let u: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a + k * b).collect();
        let lhs = d.step_agent(&x, &u, i).unwrap();
        let (s1, s2) = (d.step_agent(&x1, &u1, i).unwrap(), d.step_agent(&x2, &u2, i).unwrap());
        for j in 0..2 {
            prop_assert!((lhs[j] - (s1[j] + k * s2[j])).abs() < 1e-9);
        }
    }

    #[test]
    fn output_is_linear(i in 0usize..3, x1 in vec2(), x2 in vec2()) {
        let d = dy();
        let sum: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
        let y = d.output(&sum, i);
        let (y1, y2) = (d.output(&x1, i), d.output(&x2, i));
        for j in 0..2 {
            prop_assert!((y[j] - y1[j] - y2[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn average_of_copies_is_the_point(x in vec2(), n in 1usize..6) {
        let avg = system_average(&vec![x.clone(); n]);
        for j in 0..2 {
            prop_assert!((avg[j] - x[j]).abs() < 1e-12);
        }
    }
}

#[test]
fn step_examples() {
    let d = dy();
    assert_eq!(d.step_agent(&[10.0, -10.0], &[1.0, 0.0], 1).unwrap(), vec![10.0, -9.0]);
    assert!(d.step_agent(&[0.0, 0.0], &[2.5, 0.0], 0).is_err());
    assert!(d.step_agent(&[0.0], &[0.0, 0.0], 0).is_err());
    assert!(LinearDynamics::new(vec![1.0], vec![1.0], vec![], 1, 0.0, 1.0).is_err());
}

#[test]
fn graph_validation() {
    assert!(Graph::new(3, &[(0, 1), (1, 2)]).unwrap().is_connected());
    assert!(!Graph::new(4, &[(0, 1), (2, 3)]).unwrap().is_connected());
    assert!(Graph::new(3, &[(0, 3)]).is_err());
    let c = Graph::cycle(4);
    assert_eq!(c.edges().len(), 4);
    assert!(c.has_edge(3, 0) && !c.has_edge(0, 2));
}
