use std::collections::HashMap;

use milp::{LinExpr, Model, Relation, Solution, VarId};

use super::{face_expr, EncodeError, EncodingConfig, SignalTable};
use crate::mtl::{Formula, PredicateTable};

/// Handle to an encoded robustness value.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessVar {
    pub rho: VarId,
    /// Every min/max auxiliary created on the way, for the big-M check.
    pub aux: Vec<VarId>,
}

impl RobustnessVar {
    /// Flags solutions where an auxiliary sits at the big-M bound, which
    /// means the constant was too small for the encoded signal range.
    pub fn check_big_m(&self, sol: &Solution, big_m: f64) -> Result<(), EncodeError> {
        for &v in self.aux.iter().chain(std::iter::once(&self.rho)) {
            let x = sol.value(v);
            if (x.abs() - big_m).abs() < 1e-3 || x.abs() > big_m {
                return Err(EncodeError::BigMTooSmall { value: x, big_m });
            }
        }
        Ok(())
    }
}

pub(crate) struct ExactEncoder<'a> {
    preds: &'a PredicateTable,
    big_m: f64,
    memo: HashMap<(usize, usize), LinExpr>,
    pub(crate) aux: Vec<VarId>,
}

#[derive(Clone, Copy)]
enum Sense {
    Min,
    Max,
}

impl<'a> ExactEncoder<'a> {
    pub(crate) fn new(preds: &'a PredicateTable, big_m: f64) -> Self {
        Self {
            preds,
            big_m,
            memo: HashMap::new(),
            aux: Vec::new(),
        }
    }

    pub(crate) fn rho(
        &mut self,
        model: &mut Model,
        sig: &SignalTable,
        f: &'a Formula,
        t: usize,
    ) -> Result<LinExpr, EncodeError> {
        let key = (f as *const Formula as usize, t);
        if let Some(e) = self.memo.get(&key) {
            return Ok(e.clone());
        }
        let e = match f {
            Formula::True => LinExpr::constant(self.big_m),
            Formula::Atom(n) => {
                let p = self.preds.get(n)?;
                let s = sig.sample(t)?;
                let faces: Vec<LinExpr> = p.halfspaces.iter().map(|h| face_expr(h, s)).collect();
                self.extremum(model, faces, Sense::Min)
            }
            Formula::Not(c) => -self.rho(model, sig, c, t)?,
            Formula::And(l, r) | Formula::Or(l, r) => {
                let ops = vec![self.rho(model, sig, l, t)?, self.rho(model, sig, r, t)?];
                let sense = if matches!(f, Formula::And(..)) {
                    Sense::Min
                } else {
                    Sense::Max
                };
                self.extremum(model, ops, sense)
            }
            Formula::Eventually(i, c) | Formula::Globally(i, c) => {
                let mut ops = Vec::with_capacity(i.b - i.a + 1);
                for s in t + i.a..=t + i.b {
                    ops.push(self.rho(model, sig, c, s)?);
                }
                let sense = if matches!(f, Formula::Globally(..)) {
                    Sense::Min
                } else {
                    Sense::Max
                };
                self.extremum(model, ops, sense)
            }
            Formula::Until(i, l, r) => {
                let mut terms = Vec::new();
                let mut prefix: Option<LinExpr> = None;
                for s in t + i.a..=t + i.b {
                    let right = self.rho(model, sig, r, s)?;
                    terms.push(match &prefix {
                        None => right,
                        Some(p) => self.extremum(model, vec![right, p.clone()], Sense::Min),
                    });
                    let left = self.rho(model, sig, l, s)?;
                    prefix = Some(match prefix {
                        None => left,
                        Some(p) => self.extremum(model, vec![p, left], Sense::Min),
                    });
                }
                self.extremum(model, terms, Sense::Max)
            }
        };
        self.memo.insert(key, e.clone());
        Ok(e)
    }

    /// Exact min or max of `ops` with one selector binary per operand.
    fn extremum(&mut self, model: &mut Model, mut ops: Vec<LinExpr>, sense: Sense) -> LinExpr {
        if ops.iter().all(|e| e.is_constant()) {
            let vals = ops.iter().map(|e| e.constant_part());
            return LinExpr::constant(match sense {
                Sense::Min => vals.fold(f64::INFINITY, f64::min),
                Sense::Max => vals.fold(f64::NEG_INFINITY, f64::max),
            });
        }
        if ops.len() == 1 {
            return ops.pop().unwrap();
        }
        let bounds: Vec<(f64, f64)> = ops.iter().map(|e| model.bounds_of(e)).collect();
        let (ylo, yhi) = match sense {
            Sense::Min => bounds
                .iter()
                .fold((f64::INFINITY, f64::INFINITY), |(l, h), b| (l.min(b.0), h.min(b.1))),
            Sense::Max => bounds
                .iter()
                .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(l, h), b| (l.max(b.0), h.max(b.1))),
        };
        let y = model.add_continuous(format!("rho{}", model.num_vars()), ylo, yhi);
        self.aux.push(y);
        let mut pick = LinExpr::zero();
        for (e, &(elo, ehi)) in ops.iter().zip(&bounds) {
            let b = model.add_binary(format!("sel{}", model.num_vars()));
            pick.add_term(b, 1.0);
            // y - e and the big-M relaxation on the selected operand
            let diff = LinExpr::var(y) - e;
            match sense {
                Sense::Min => {
                    let m = self.big_m.min(ehi - ylo);
                    model.add_constraint(diff.clone(), Relation::Le, 0.0);
                    model.add_constraint(diff + LinExpr::term(b, -m), Relation::Ge, -m);
                }
                Sense::Max => {
                    let m = self.big_m.min(yhi - elo);
                    model.add_constraint(diff.clone(), Relation::Ge, 0.0);
                    model.add_constraint(diff + LinExpr::term(b, m), Relation::Le, m);
                }
            }
        }
        model.add_constraint(pick, Relation::Eq, 1.0);
        LinExpr::var(y)
    }
}

/// Encodes `ρ(f, t)` exactly and returns it as an affine expression.
pub fn encode_robustness_expr(
    f: &Formula,
    signals: &SignalTable,
    t: usize,
    model: &mut Model,
    cfg: &EncodingConfig,
    preds: &PredicateTable,
) -> Result<(LinExpr, Vec<VarId>), EncodeError> {
    cfg.validate()?;
    let end = t + f.horizon();
    if end >= signals.end() {
        return Err(EncodeError::SymbolGap(signals.end()));
    }
    let mut enc = ExactEncoder::new(preds, cfg.big_m);
    let e = enc.rho(model, signals, f, t)?;
    Ok((e, enc.aux))
}

/// Encodes `ρ(f, t)` into a dedicated variable and requires `ρ >= r_min`.
pub fn encode_robustness(
    f: &Formula,
    signals: &SignalTable,
    t: usize,
    model: &mut Model,
    cfg: &EncodingConfig,
    preds: &PredicateTable,
) -> Result<RobustnessVar, EncodeError> {
    let (e, aux) = encode_robustness_expr(f, signals, t, model, cfg, preds)?;
    let rho = model.add_free(format!("rho_{t}"));
    model.add_constraint(LinExpr::var(rho) - &e, Relation::Eq, 0.0);
    model.add_constraint(LinExpr::var(rho), Relation::Ge, cfg.r_min);
    Ok(RobustnessVar { rho, aux })
}
