use super::{Formula, MtlError, Predicate, PredicateTable, Trajectory};

/// Smallest scaled face slack: positive strictly inside, negative outside.
pub fn signed_distance(point: &[f64], p: &Predicate) -> Result<f64, MtlError> {
    if point.len() != p.dim() {
        return Err(MtlError::DimensionMismatch {
            expected: p.dim(),
            got: point.len(),
        });
    }
    Ok(p
        .halfspaces
        .iter()
        .map(|h| h.slack(point))
        .fold(f64::INFINITY, f64::min))
}

fn check_len(traj: &Trajectory, f: &Formula, t: usize) -> Result<(), MtlError> {
    let needed = t + f.horizon() + 1;
    if needed > traj.len() {
        return Err(MtlError::TooShort {
            needed,
            len: traj.len(),
        });
    }
    Ok(())
}

/// Robustness degree of `traj` against `f` at step `t`.
pub fn robustness(
    traj: &Trajectory,
    f: &Formula,
    t: usize,
    preds: &PredicateTable,
) -> Result<f64, MtlError> {
    check_len(traj, f, t)?;
    f.check(preds, traj.dim())?;
    Ok(rho(traj, f, t, preds))
}

fn rho(traj: &Trajectory, f: &Formula, t: usize, preds: &PredicateTable) -> f64 {
    match f {
        Formula::True => f64::INFINITY,
        Formula::Atom(n) => signed_distance(traj.at(t), preds.get(n).unwrap()).unwrap(),
        Formula::Not(c) => -rho(traj, c, t, preds),
        Formula::And(l, r) => rho(traj, l, t, preds).min(rho(traj, r, t, preds)),
        Formula::Or(l, r) => rho(traj, l, t, preds).max(rho(traj, r, t, preds)),
        Formula::Eventually(i, c) => (t + i.a..=t + i.b)
            .map(|s| rho(traj, c, s, preds))
            .fold(f64::NEG_INFINITY, f64::max),
        Formula::Globally(i, c) => (t + i.a..=t + i.b)
            .map(|s| rho(traj, c, s, preds))
            .fold(f64::INFINITY, f64::min),
        Formula::Until(i, l, r) => {
            let mut best = f64::NEG_INFINITY;
            let mut prefix = f64::INFINITY;
            for s in t + i.a..=t + i.b {
                best = best.max(rho(traj, r, s, preds).min(prefix));
                prefix = prefix.min(rho(traj, l, s, preds));
            }
            best
        }
    }
}

/// Boolean satisfaction, with atoms read as the closed regions.
pub fn boolean_sat(
    traj: &Trajectory,
    f: &Formula,
    t: usize,
    preds: &PredicateTable,
) -> Result<bool, MtlError> {
    check_len(traj, f, t)?;
    f.check(preds, traj.dim())?;
    Ok(sat(traj, f, t, preds))
}

fn sat(traj: &Trajectory, f: &Formula, t: usize, preds: &PredicateTable) -> bool {
    match f {
        Formula::True => true,
        Formula::Atom(n) => {
            let s = traj.at(t);
            preds
                .get(n)
                .unwrap()
                .halfspaces
                .iter()
                .all(|h| h.normal.iter().zip(s).map(|(a, x)| a * x).sum::<f64>() <= h.offset)
        }
        Formula::Not(c) => !sat(traj, c, t, preds),
        Formula::And(l, r) => sat(traj, l, t, preds) && sat(traj, r, t, preds),
        Formula::Or(l, r) => sat(traj, l, t, preds) || sat(traj, r, t, preds),
        Formula::Eventually(i, c) => (t + i.a..=t + i.b).any(|s| sat(traj, c, s, preds)),
        Formula::Globally(i, c) => (t + i.a..=t + i.b).all(|s| sat(traj, c, s, preds)),
        Formula::Until(i, l, r) => (t + i.a..=t + i.b)
            .any(|s| sat(traj, r, s, preds) && (t + i.a..s).all(|q| sat(traj, l, q, preds))),
    }
}
