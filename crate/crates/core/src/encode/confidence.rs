use crate::mtl::Formula;

use super::EncodeError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMode {
    /// Rules exactly as stated for the recursion: windowed operators all
    /// take the best step.
    #[default]
    PaperFaithful,
    /// `Globally` uses a union bound over the window and the `Until` prefix
    /// excludes the witness step.
    Sound,
}

/// Lower bound on the probability that the true signal satisfies `f` at
/// `t`, given per-step estimation error bounds `eps` (indexed by absolute
/// time) and a robustness margin `r_min` on the estimate.
///
/// Negations are pushed to the atoms; a negated atom has the same bound as
/// the atom. Negated `Until` has no rule and is rejected.
pub fn confidence_lower_bound(
    f: &Formula,
    eps: &[f64],
    r_min: f64,
    t: usize,
    mode: ConfidenceMode,
) -> Result<f64, EncodeError> {
    if !(r_min > 0.0) {
        return Err(EncodeError::NonPositiveRmin(r_min));
    }
    let needed = t + f.horizon() + 1;
    if eps.len() < needed {
        return Err(EncodeError::ShortErrorBound {
            needed,
            len: eps.len(),
        });
    }
    gamma(f, false, eps, r_min, t, mode)
}

fn gamma(
    f: &Formula,
    neg: bool,
    eps: &[f64],
    r: f64,
    t: usize,
    mode: ConfidenceMode,
) -> Result<f64, EncodeError> {
    let g = |c: &Formula, n: bool, s: usize| gamma(c, n, eps, r, s, mode);
    Ok(match (f, neg) {
        (Formula::True, false) => 1.0,
        (Formula::True, true) => 0.0,
        (Formula::Atom(_), _) => 1.0 - eps[t] / r,
        (Formula::Not(c), _) => g(c, !neg, t)?,
        (Formula::And(l, rr), false) | (Formula::Or(l, rr), true) => {
            g(l, neg, t)? + g(rr, neg, t)? - 1.0
        }
        (Formula::Or(l, rr), false) | (Formula::And(l, rr), true) => {
            let (a, b) = (g(l, neg, t)?, g(rr, neg, t)?);
            1.0 - (1.0 - a).min(1.0 - b)
        }
        (Formula::Globally(i, c), false) | (Formula::Eventually(i, c), true) => {
            let vals = (t + i.a..=t + i.b)
                .map(|s| g(c, neg, s))
                .collect::<Result<Vec<_>, _>>()?;
            match mode {
                ConfidenceMode::PaperFaithful => {
                    1.0 - vals.iter().map(|v| 1.0 - v).fold(f64::INFINITY, f64::min)
                }
                ConfidenceMode::Sound => 1.0 - vals.iter().map(|v| 1.0 - v).sum::<f64>(),
            }
        }
        (Formula::Eventually(i, c), false) | (Formula::Globally(i, c), true) => {
            let mut best = f64::INFINITY;
            for s in t + i.a..=t + i.b {
                best = best.min(1.0 - g(c, neg, s)?);
            }
            1.0 - best
        }
        (Formula::Until(i, l, rr), false) => {
            let mut best = f64::INFINITY;
            let mut prefix = 0.0;
            for s in t + i.a..=t + i.b {
                let miss_left = 1.0 - g(l, false, s)?;
                if mode == ConfidenceMode::PaperFaithful {
                    prefix += miss_left;
                }
                best = best.min(1.0 - g(rr, false, s)? + prefix);
                if mode == ConfidenceMode::Sound {
                    prefix += miss_left;
                }
            }
            1.0 - best
        }
        (Formula::Until(..), true) => {
            return Err(EncodeError::Unsupported("negated Until".into()));
        }
    })
}

/// Smallest margin `r` such that the confidence bound reaches `gamma_min`
/// at every time in `times`, to a relative tolerance of 1e-12.
pub fn required_rmin(
    f: &Formula,
    eps: &[f64],
    gamma_min: f64,
    mode: ConfidenceMode,
    times: std::ops::RangeInclusive<usize>,
) -> Result<f64, EncodeError> {
    if !(gamma_min > 0.0 && gamma_min < 1.0) {
        return Err(EncodeError::InvalidConfig(format!("gamma_min = {gamma_min}")));
    }
    if let Some(bad) = eps.iter().find(|e| !e.is_finite()) {
        return Err(EncodeError::InvalidConfig(format!("error bound {bad}")));
    }
    let worst = |r: f64| -> Result<f64, EncodeError> {
        let mut w = f64::INFINITY;
        for t in times.clone() {
            w = w.min(confidence_lower_bound(f, eps, r, t, mode)?);
        }
        Ok(w)
    };
    const CAP: f64 = 1e15;
    let mut hi = 1.0;
    let mut lo = 0.0;
    loop {
        let w = worst(hi)?;
        if w >= gamma_min {
            break;
        }
        if hi >= CAP {
            return Err(EncodeError::Unreachable {
                gamma: gamma_min,
                best: w,
            });
        }
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if worst(mid)? >= gamma_min {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
