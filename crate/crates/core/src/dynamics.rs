//! Diagonal linear agent dynamics and the communication graph.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("input {value} of agent {agent} outside [{lo}, {hi}]")]
    InputOutOfBounds {
        agent: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid dynamics: {0}")]
    Invalid(String),
}

/// Per-agent scalar gains applied to every coordinate of that agent.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDynamics {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub dims: usize,
    pub u_min: f64,
    pub u_max: f64,
}

/// Slack allowed on input bounds for solver round-off.
const INPUT_TOL: f64 = 1e-6;

impl LinearDynamics {
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, dims: usize, u_min: f64, u_max: f64) -> Result<Self, DynamicsError> {
        if a.len() != b.len() || a.len() != c.len() || a.is_empty() {
            return Err(DynamicsError::Invalid("a, b, c must have one entry per agent".into()));
        }
        if !(u_min <= u_max) {
            return Err(DynamicsError::Invalid(format!("u_min {u_min} > u_max {u_max}")));
        }
        if dims == 0 {
            return Err(DynamicsError::Invalid("zero dimensions".into()));
        }
        Ok(Self { a, b, c, dims, u_min, u_max })
    }

    pub fn agents(&self) -> usize {
        self.a.len()
    }

    pub fn step_agent(&self, x: &[f64], u: &[f64], i: usize) -> Result<Vec<f64>, DynamicsError> {
        if x.len() != self.dims || u.len() != self.dims {
            return Err(DynamicsError::DimensionMismatch {
                expected: self.dims,
                got: if x.len() != self.dims { x.len() } else { u.len() },
            });
        }
        if let Some(&v) = u
            .iter()
            .find(|&&v| v < self.u_min - INPUT_TOL || v > self.u_max + INPUT_TOL)
        {
            return Err(DynamicsError::InputOutOfBounds {
                agent: i,
                value: v,
                lo: self.u_min,
                hi: self.u_max,
            });
        }
        Ok(x.iter().zip(u).map(|(x, u)| self.a[i] * x + self.b[i] * u).collect())
    }

    pub fn output(&self, x: &[f64], i: usize) -> Vec<f64> {
        x.iter().map(|v| self.c[i] * v).collect()
    }
}

pub fn system_average(states: &[Vec<f64>]) -> Vec<f64> {
    let n = states.len() as f64;
    let dims = states.first().map_or(0, |s| s.len());
    let mut eta = vec![0.0; dims];
    for s in states {
        for (e, v) in eta.iter_mut().zip(s) {
            *e += v;
        }
    }
    eta.iter_mut().for_each(|e| *e /= n);
    eta
}

/// Undirected graph on agents `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, DynamicsError> {
        let mut neighbors = vec![Vec::new(); n];
        let mut list = Vec::new();
        for &(i, l) in edges {
            if i >= n || l >= n {
                return Err(DynamicsError::InvalidGraph(format!(
                    "edge ({}, {}) references an agent outside 1..={n}",
                    i + 1,
                    l + 1
                )));
            }
            if i == l {
                return Err(DynamicsError::InvalidGraph(format!("self-loop at agent {}", i + 1)));
            }
            let e = (i.min(l), i.max(l));
            if !list.contains(&e) {
                list.push(e);
                neighbors[i].push(l);
                neighbors[l].push(i);
            }
        }
        neighbors.iter_mut().for_each(|v| v.sort_unstable());
        list.sort_unstable();
        Ok(Self {
            n,
            edges: list,
            neighbors,
        })
    }

    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::new(n, &edges).expect("cycle is valid")
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, i: usize, l: usize) -> bool {
        self.neighbors[i].contains(&l)
    }

    pub fn adjacency(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for &(i, l) in &self.edges {
            d[i][l] = 1.0;
            d[l][i] = 1.0;
        }
        d
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &l in &self.neighbors[i] {
                if !seen[l] {
                    seen[l] = true;
                    stack.push(l);
                }
            }
        }
        seen.iter().all(|&s| s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dyn1(a: f64, b: f64, c: f64) -> LinearDynamics {
        LinearDynamics::new(vec![a], vec![b], vec![c], 2, -2.0, 2.0).unwrap()
    }

    #[test]
    fn step_examples() {
        let d = dyn1(0.1, 0.1, 0.1);
        let x = d.step_agent(&[1.0, 1.0], &[1.0, 1.0], 0).unwrap();
        assert!(x.iter().all(|v| (v - 0.2).abs() < 1e-15));
        assert_eq!(d.step_agent(&[10.0, -5.0], &[0.0, 0.0], 0).unwrap(), vec![1.0, -0.5]);
        assert_eq!(dyn1(1.0, 0.0, 1.0).step_agent(&[3.0, 4.0], &[1.0, 1.0], 0).unwrap(), vec![3.0, 4.0]);
        assert!(d.step_agent(&[0.0, 0.0], &[3.0, 0.0], 0).is_err());
    }

    #[test]
    fn outputs() {
        assert!(dyn1(0.1, 0.1, 0.1).output(&[10.0, 10.0], 0).iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert_eq!(dyn1(0.1, 0.1, 1.0).output(&[3.0, 4.0], 0), vec![3.0, 4.0]);
        assert_eq!(dyn1(0.1, 0.1, 0.0).output(&[3.0, 4.0], 0), vec![0.0, 0.0]);
    }

    #[test]
    fn averages() {
        let s = vec![
            vec![-100.0, -100.0],
            vec![100.0, 100.0],
            vec![-100.0, 10.0],
            vec![100.0, -10.0],
        ];
        assert_eq!(system_average(&s), vec![0.0, 0.0]);
        assert_eq!(system_average(&vec![vec![2.0, 3.0]; 3]), vec![2.0, 3.0]);
        assert_eq!(system_average(&[vec![7.0]]), vec![7.0]);
    }

    #[test]
    fn graphs() {
        let g = Graph::new(4, &[(0, 1), (0, 3), (1, 2), (2, 3)]).unwrap();
        assert!(g.is_connected());
        assert_eq!(g.neighbors(0), &[1, 3]);
        assert!(Graph::new(4, &[(0, 4)]).is_err());
        assert!(Graph::new(3, &[(1, 1)]).is_err());
        assert!(!Graph::new(4, &[(0, 1), (2, 3)]).unwrap().is_connected());
        assert_eq!(Graph::cycle(4), g);
    }
}
