//! Gaussian output-perturbation mechanism.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrivacyError {
    #[error("probability {0} outside (0, 1)")]
    OutOfRange(f64),
    #[error("invalid privacy parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    /// Adjacency radius, in state units.
    pub nu: f64,
}

impl PrivacyParams {
    pub fn validate(&self) -> Result<(), PrivacyError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(PrivacyError::InvalidParams(format!("epsilon = {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(PrivacyError::InvalidParams(format!("delta = {}", self.delta)));
        }
        if !(self.nu >= 0.0) {
            return Err(PrivacyError::InvalidParams(format!("nu = {}", self.nu)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub sensitivity: f64,
}

/// Standard normal upper tail `P(Z > y)`.
pub fn q_function(y: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(y / std::f64::consts::SQRT_2)
}

/// Inverse of [`q_function`] by bisection.
pub fn q_inverse(delta: f64) -> Result<f64, PrivacyError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PrivacyError::OutOfRange(delta));
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if q_function(mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn sensitivity_upper(c_gain: f64, nu: f64) -> f64 {
    c_gain.abs() * nu
}

/// Smallest noise level for the given sensitivity and `(ε, δ)`:
/// `σ = Δ/(2ε) · (κ + sqrt(κ² + 2ε))`, `κ = Q⁻¹(δ)`.
pub fn calibrate_sigma(sensitivity: f64, p: &PrivacyParams) -> Result<NoiseSpec, PrivacyError> {
    p.validate()?;
    if !(sensitivity >= 0.0) {
        return Err(PrivacyError::InvalidParams(format!("sensitivity = {sensitivity}")));
    }
    let k = q_inverse(p.delta)?;
    let sigma = sensitivity / (2.0 * p.epsilon) * (k + (k * k + 2.0 * p.epsilon).sqrt());
    Ok(NoiseSpec { sigma, sensitivity })
}

/// Independent random stream for `(seed, run, agent, stream)`.
///
/// The four words are mixed with SplitMix64 finalisers into a 32-byte
/// ChaCha12 key, so nearby indices give unrelated streams.
pub fn substream(seed: u64, run: u64, agent: u64, stream: u64) -> ChaCha12Rng {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let mut key = [0u8; 32];
    let mut acc = mix(seed);
    for (k, w) in [run, agent, stream, 0x5eed].into_iter().enumerate() {
        acc = mix(acc ^ mix(w.wrapping_add(k as u64)));
        key[8 * k..8 * k + 8].copy_from_slice(&acc.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Adds i.i.d. `N(0, σ²)` noise to every coordinate of `y`.
pub fn gaussian_mechanism<R: rand::Rng + ?Sized>(y: &[f64], spec: &NoiseSpec, rng: &mut R) -> Vec<f64> {
    if spec.sigma == 0.0 {
        return y.to_vec();
    }
    let n = Normal::new(0.0, spec.sigma).expect("finite sigma");
    y.iter().map(|v| v + n.sample(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_basics() {
        assert_eq!(q_function(0.0), 0.5);
        assert!(q_function(40.0) < 1e-300);
        assert!(q_inverse(0.5).unwrap().abs() < 1e-12);
        assert!(q_inverse(0.0).is_err() && q_inverse(1.0).is_err());
    }

    #[test]
    fn sensitivity() {
        assert!((sensitivity_upper(0.1, 10.0) - 1.0).abs() < 1e-15);
        assert_eq!(sensitivity_upper(1.0, 0.0), 0.0);
        assert_eq!(sensitivity_upper(-2.0, 3.0), 6.0);
    }

    #[test]
    fn zero_sensitivity_needs_no_noise() {
        let p = PrivacyParams {
            epsilon: 1.0,
            delta: 0.1,
            nu: 0.0,
        };
        assert_eq!(calibrate_sigma(0.0, &p).unwrap().sigma, 0.0);
        let bad = PrivacyParams { delta: 0.6, ..p };
        assert!(calibrate_sigma(1.0, &bad).is_err());
    }

    #[test]
    fn zero_sigma_passes_through() {
        let spec = NoiseSpec {
            sigma: 0.0,
            sensitivity: 0.0,
        };
        let mut rng = substream(0, 0, 0, 0);
        assert_eq!(gaussian_mechanism(&[3.0, 4.0], &spec, &mut rng), vec![3.0, 4.0]);
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        use rand::Rng;
        let a: u64 = substream(1, 0, 0, 0).random();
        let b: u64 = substream(1, 0, 1, 0).random();
        let c: u64 = substream(1, 0, 0, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
