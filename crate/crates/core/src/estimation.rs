//! Kalman estimation of agent states, randomized gossip on the estimates of
//! the average, and the resulting estimation error bound.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::dynamics::Graph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("singular innovation covariance at step {0}")]
    Singular(usize),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("agents {0} and {1} are not neighbours")]
    NotNeighbors(usize, usize),
    #[error("gossip matrix not doubly stochastic (deviation {0:e})")]
    NotDoublyStochastic(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid probability matrix: {0}")]
    InvalidProbabilities(String),
}

/// Gains and error covariances of the filter, independent of the data.
#[derive(Clone, Debug)]
pub struct KalmanSchedule {
    w: DMatrix<f64>,
    /// `covariances[t]` is Σ_t, starting with Σ_0.
    covariances: Vec<DMatrix<f64>>,
    /// `gains[t - 1]` is K_t.
    gains: Vec<DMatrix<f64>>,
}

impl KalmanSchedule {
    pub fn horizon(&self) -> usize {
        self.gains.len()
    }

    /// K_t for `t >= 1`; extends the schedule when needed.
    pub fn gain(&mut self, t: usize) -> Result<&DMatrix<f64>, EstimationError> {
        assert!(t >= 1, "gains start at t = 1");
        self.extend_to(t)?;
        Ok(&self.gains[t - 1])
    }

    pub fn covariance(&mut self, t: usize) -> Result<&DMatrix<f64>, EstimationError> {
        self.extend_to(t)?;
        Ok(&self.covariances[t])
    }

    pub fn extend_to(&mut self, t: usize) -> Result<(), EstimationError> {
        while self.gains.len() < t {
            let step = self.gains.len() + 1;
            let prev = self.covariances.last().unwrap();
            let s = prev + &self.w;
            let inv = s.try_inverse().ok_or(EstimationError::Singular(step))?;
            let k = prev * inv;
            let n = prev.nrows();
            let mut next = (DMatrix::identity(n, n) - &k) * prev;
            // keep the recursion symmetric against round-off
            next = (&next + next.transpose()) * 0.5;
            self.gains.push(k);
            self.covariances.push(next);
        }
        Ok(())
    }

    pub fn gains(&self) -> &[DMatrix<f64>] {
        &self.gains
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }
}

/// `K_t = Σ_{t-1}(Σ_{t-1} + W)⁻¹`, `Σ_t = (I - K_t) Σ_{t-1}` for `t = 1..=horizon`.
pub fn kalman_schedule(
    sigma0: DMatrix<f64>,
    w: DMatrix<f64>,
    horizon: usize,
) -> Result<KalmanSchedule, EstimationError> {
    if sigma0.shape() != w.shape() || !sigma0.is_square() {
        return Err(EstimationError::DimensionMismatch {
            expected: sigma0.nrows(),
            got: w.nrows(),
        });
    }
    let mut s = KalmanSchedule {
        w,
        covariances: vec![sigma0],
        gains: Vec::new(),
    };
    s.extend_to(horizon)?;
    Ok(s)
}

/// One filter step on stacked estimates (`N` rows of `d` coordinates):
/// `x̂ = A x̂⁻ + B u⁻ + K (ỹ - A x̂⁻ - B u⁻)`, applied per coordinate.
pub fn kalman_update(
    xhat_prev: &[Vec<f64>],
    u_prev: &[Vec<f64>],
    y_noisy: &[Vec<f64>],
    k: &DMatrix<f64>,
    a: &[f64],
    b: &[f64],
) -> Result<Vec<Vec<f64>>, EstimationError> {
    let n = xhat_prev.len();
    for len in [u_prev.len(), y_noisy.len(), k.nrows(), k.ncols(), a.len(), b.len()] {
        if len != n {
            return Err(EstimationError::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    let dims = xhat_prev.first().map_or(0, |r| r.len());
    let mut out = vec![vec![0.0; dims]; n];
    for d in 0..dims {
        let pred: Vec<f64> = (0..n).map(|l| a[l] * xhat_prev[l][d] + b[l] * u_prev[l][d]).collect();
        for i in 0..n {
            let mut v = pred[i];
            for l in 0..n {
                v += k[(i, l)] * (y_noisy[l][d] - pred[l]);
            }
            out[i][d] = v;
        }
    }
    Ok(out)
}

/// Neighbour-uniform communication probabilities.
pub fn build_gossip_probabilities(g: &Graph) -> Result<DMatrix<f64>, EstimationError> {
    if !g.is_connected() {
        return Err(EstimationError::Disconnected);
    }
    let n = g.len();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let nb = g.neighbors(i);
        for &l in nb {
            p[(i, l)] = 1.0 / nb.len() as f64;
        }
    }
    Ok(p)
}

#[derive(Clone, Debug)]
pub struct GossipMatrix {
    pub v: DMatrix<f64>,
    /// Second largest eigenvalue magnitude of `v`.
    pub lambda2: f64,
    pub p: DMatrix<f64>,
}

/// Expected pairwise-averaging matrix
/// `V = I - (1/N) Σ_il P_il (e_i - e_l)(e_i - e_l)ᵀ / 2`.
pub fn expected_gossip_matrix(p: &DMatrix<f64>) -> Result<GossipMatrix, EstimationError> {
    let n = p.nrows();
    if !p.is_square() {
        return Err(EstimationError::DimensionMismatch {
            expected: n,
            got: p.ncols(),
        });
    }
    for i in 0..n {
        let row: f64 = p.row(i).sum();
        if p.row(i).iter().any(|&x| x < 0.0) || (row - 1.0).abs() > 1e-10 {
            return Err(EstimationError::InvalidProbabilities(format!("row {} sums to {row}", i + 1)));
        }
    }
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for l in 0..n {
            let w = p[(i, l)] * scale;
            if w == 0.0 || i == l {
                continue;
            }
            v[(i, i)] -= w;
            v[(l, l)] -= w;
            v[(i, l)] += w;
            v[(l, i)] += w;
        }
    }
    let mut dev = 0.0f64;
    for i in 0..n {
        dev = dev.max((v.row(i).sum() - 1.0).abs());
        dev = dev.max((v.column(i).sum() - 1.0).abs());
    }
    if dev > 1e-10 {
        return Err(EstimationError::NotDoublyStochastic(dev));
    }
    let lambda2 = second_eigenvalue(&v);
    Ok(GossipMatrix {
        v,
        lambda2,
        p: p.clone(),
    })
}

fn second_eigenvalue(v: &DMatrix<f64>) -> f64 {
    let mut mags: Vec<f64> = jacobi_eigenvalues(v).iter().map(|e| e.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.get(1).copied().unwrap_or(0.0)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Greedy coordinate search on `P` that keeps sparsity and row sums and
/// accepts only moves lowering λ₂.
pub fn refine_probabilities(g: &Graph, p: &DMatrix<f64>, rounds: usize) -> Result<GossipMatrix, EstimationError> {
    let mut best = expected_gossip_matrix(p)?;
    let mut step: f64 = 0.1;
    for _ in 0..rounds {
        let mut improved = false;
        for i in 0..g.len() {
            let nb = g.neighbors(i);
            for &from in nb {
                for &to in nb {
                    if from == to {
                        continue;
                    }
                    let mv = step.min(best.p[(i, from)]);
                    if mv <= 0.0 {
                        continue;
                    }
                    let mut cand = best.p.clone();
                    cand[(i, from)] -= mv;
                    cand[(i, to)] += mv;
                    let gm = expected_gossip_matrix(&cand)?;
                    if gm.lambda2 < best.lambda2 - 1e-12 {
                        best = gm;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < 1e-6 {
                break;
            }
        }
    }
    Ok(best)
}

/// Pairwise averaging between `i` and `l` plus every agent's own estimate
/// increment.
pub fn gossip_pair_update(
    zeta: &[Vec<f64>],
    pair: (usize, usize),
    g: &Graph,
    xhat_now: &[Vec<f64>],
    xhat_prev: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, EstimationError> {
    let (i, l) = pair;
    if i == l || !g.has_edge(i, l) {
        return Err(EstimationError::NotNeighbors(i + 1, l + 1));
    }
    let mut out: Vec<Vec<f64>> = zeta.to_vec();
    let avg: Vec<f64> = zeta[i].iter().zip(&zeta[l]).map(|(a, b)| 0.5 * (a + b)).collect();
    out[i] = avg.clone();
    out[l] = avg;
    for (k, row) in out.iter_mut().enumerate() {
        for (d, v) in row.iter_mut().enumerate() {
            *v += xhat_now[k][d] - xhat_prev[k][d];
        }
    }
    Ok(out)
}

/// Worst-case summed estimate variance after `t` measurements.
pub fn delta_max(t: usize, n: usize, s_max: f64, v_max: f64) -> f64 {
    (n * n) as f64 * s_max * v_max / (v_max + t as f64 * s_max)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ErrorBoundParams {
    pub lambda: f64,
    pub l1: f64,
    pub l2: f64,
    pub zeta_max: f64,
    pub s_max: f64,
    pub v_max: f64,
    pub u_max: f64,
    pub n: usize,
    /// Multiply the initial-spread term into the input term instead of
    /// adding it.
    #[serde(default)]
    pub multiplicative: bool,
}

/// Expected-error bound on the gossip estimates at step `t`.
pub fn error_bound(t: usize, p: &ErrorBoundParams) -> f64 {
    let n = p.n as f64;
    let dm = |k: usize| delta_max(k, p.n, p.s_max, p.v_max);
    let initial = p.lambda.powi(t as i32) * n.sqrt() * p.zeta_max;
    let mut sum = 0.0;
    for k in 1..=t {
        sum += p.lambda.powi((t - k) as i32)
            * (dm(k) + dm(k - 1) + 2.0 * n * p.u_max * p.u_max).sqrt();
    }
    let tail = p.l2 * dm(t).sqrt();
    if p.multiplicative {
        initial * p.l1 * sum + tail
    } else {
        initial + p.l1 * sum + tail
    }
}

/// `error_bound(t)` for `t = 0..len`, computed with a running sum.
pub fn error_bound_trace(len: usize, p: &ErrorBoundParams) -> Vec<f64> {
    let n = p.n as f64;
    let dm = |k: usize| delta_max(k, p.n, p.s_max, p.v_max);
    let mut out = Vec::with_capacity(len);
    let mut sum = 0.0;
    for t in 0..len {
        if t > 0 {
            sum = p.lambda * sum + (dm(t) + dm(t - 1) + 2.0 * n * p.u_max * p.u_max).sqrt();
        }
        let initial = p.lambda.powi(t as i32) * n.sqrt() * p.zeta_max;
        let tail = p.l2 * dm(t).sqrt();
        out.push(if p.multiplicative {
            initial * p.l1 * sum + tail
        } else {
            initial + p.l1 * sum + tail
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_measurements() {
        let mut s = kalman_schedule(DMatrix::identity(3, 3), DMatrix::zeros(3, 3), 1).unwrap();
        assert_eq!(s.gain(1).unwrap(), &DMatrix::identity(3, 3));
        assert_eq!(s.covariance(1).unwrap(), &DMatrix::zeros(3, 3));
    }

    #[test]
    fn diagonal_stays_diagonal() {
        let s0 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let w = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 0.1, 2.0]));
        let s = kalman_schedule(s0, w, 20).unwrap();
        for m in s.gains().iter().chain(s.covariances()) {
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        assert_eq!(m[(i, j)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn update_examples() {
        let x = vec![vec![1.0]];
        let u = vec![vec![1.0]];
        let y = vec![vec![0.5]];
        let k0 = DMatrix::zeros(1, 1);
        let r = kalman_update(&x, &u, &y, &k0, &[0.1], &[0.1]).unwrap();
        assert!((r[0][0] - 0.2).abs() < 1e-15);
        let r = kalman_update(&x, &u, &y, &DMatrix::identity(1, 1), &[0.1], &[0.1]).unwrap();
        assert_eq!(r[0][0], 0.5);
        let half = DMatrix::from_element(1, 1, 0.5);
        let r = kalman_update(&x, &u, &y, &half, &[0.1], &[0.1]).unwrap();
        assert!((r[0][0] - 0.35).abs() < 1e-15);
    }

    #[test]
    fn probabilities() {
        let c4 = Graph::cycle(4);
        let p = build_gossip_probabilities(&c4).unwrap();
        assert_eq!(p[(0, 1)], 0.5);
        assert_eq!(p[(0, 3)], 0.5);
        assert_eq!(p[(0, 2)], 0.0);
        let two = Graph::new(2, &[(0, 1)]).unwrap();
        let p = build_gossip_probabilities(&two).unwrap();
        assert_eq!(p, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let star = Graph::new(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let p = build_gossip_probabilities(&star).unwrap();
        assert_eq!(p.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let split = Graph::new(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(build_gossip_probabilities(&split), Err(EstimationError::Disconnected));
    }

    #[test]
    fn two_agent_matrix() {
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let g = expected_gossip_matrix(&p).unwrap();
        // the only possible exchange averages both agents completely
        assert_eq!(g.v, DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]));
        assert!(g.lambda2.abs() < 1e-15);
    }

    #[test]
    fn disconnected_pattern_gives_unit_lambda2() {
        let p = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
        );
        let g = expected_gossip_matrix(&p).unwrap();
        assert!((g.lambda2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn refinement_never_worsens() {
        let g = Graph::new(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 2)]).unwrap();
        let p = build_gossip_probabilities(&g).unwrap();
        let base = expected_gossip_matrix(&p).unwrap();
        let refined = refine_probabilities(&g, &p, 20).unwrap();
        assert!(refined.lambda2 <= base.lambda2);
        for i in 0..5 {
            assert!((refined.p.row(i).sum() - 1.0).abs() < 1e-12);
            for l in 0..5 {
                if !g.has_edge(i, l) {
                    assert_eq!(refined.p[(i, l)], 0.0);
                }
            }
        }
    }

    #[test]
    fn pair_update_examples() {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        let x = vec![vec![1.0], vec![2.0]];
        let z = vec![vec![0.0], vec![10.0]];
        assert_eq!(gossip_pair_update(&z, (0, 1), &g, &x, &x).unwrap(), vec![vec![5.0], vec![5.0]]);
        let same = vec![vec![3.0], vec![3.0]];
        assert_eq!(gossip_pair_update(&same, (1, 0), &g, &x, &x).unwrap(), same);
        let c4 = Graph::cycle(4);
        let z4 = vec![vec![0.0]; 4];
        let x4 = vec![vec![0.0]; 4];
        assert!(gossip_pair_update(&z4, (0, 2), &c4, &x4, &x4).is_err());
    }

    #[test]
    fn delta_max_values() {
        assert_eq!(delta_max(0, 4, 2.0, 1.0), 32.0);
        assert_eq!(delta_max(1, 4, 1.0, 1.0), 8.0);
        assert!(delta_max(1_000_000, 4, 1.0, 1.0) < 1e-3 * delta_max(0, 4, 1.0, 1.0));
    }

    fn params(lambda: f64) -> ErrorBoundParams {
        ErrorBoundParams {
            lambda,
            l1: 1.0,
            l2: 1.0,
            zeta_max: 100.0 * 2f64.sqrt(),
            s_max: 1.0,
            v_max: 1.0,
            u_max: 2.0,
            n: 4,
            multiplicative: false,
        }
    }

    #[test]
    fn error_bound_special_cases() {
        let p = params(0.5);
        let expect0 = 2.0 * p.zeta_max + p.l2 * 4.0 * p.s_max.sqrt();
        assert!((error_bound(0, &p) - expect0).abs() < 1e-12);
        let p0 = params(0.0);
        let dm = |k| delta_max(k, 4, 1.0, 1.0);
        let t = 3;
        let expect = (dm(t) + dm(t - 1) + 2.0 * 4.0 * 4.0).sqrt() + dm(t).sqrt();
        assert!((error_bound(t, &p0) - expect).abs() < 1e-12);
        let trace = error_bound_trace(50, &p);
        for (t, v) in trace.iter().enumerate() {
            assert!((v - error_bound(t, &p)).abs() < 1e-9 * v.max(1.0));
        }
    }
}
