use std::collections::HashMap;

use milp::{LinExpr, Model, Relation};

use super::exact::ExactEncoder;
use super::{face_expr, EncodeError, SignalTable};
use crate::mtl::{Formula, PredicateTable};

/// Indicator of a sub-requirement: a positive value implies it holds.
#[derive(Clone, Debug)]
enum Ind {
    Const(bool),
    Expr(LinExpr),
}

type Key = (usize, bool, usize, u64);

/// Encodes threshold requirements `ρ(f, t) >= r` without robustness
/// variables.
///
/// Negations are pushed down to the atoms. A requirement that must hold
/// outright becomes plain face constraints; disjunctive parts get one
/// binary per (atom, time, threshold), and conjunctions over those use
/// continuous variables bounded by their children. The model is feasible
/// exactly when some input makes every required robustness reach its
/// threshold. Negated `Until` falls back to the exact min/max encoding.
pub struct RequirementEncoder<'a> {
    preds: &'a PredicateTable,
    big_m: f64,
    memo: HashMap<Key, Ind>,
    exact: ExactEncoder<'a>,
    binaries: usize,
    trivially_infeasible: bool,
}

impl<'a> RequirementEncoder<'a> {
    pub fn new(preds: &'a PredicateTable, big_m: f64) -> Self {
        Self {
            preds,
            big_m,
            memo: HashMap::new(),
            exact: ExactEncoder::new(preds, big_m),
            binaries: 0,
            trivially_infeasible: false,
        }
    }

    pub fn binaries(&self) -> usize {
        self.binaries
    }

    /// True once a requirement was found violated by constant samples alone.
    pub fn trivially_infeasible(&self) -> bool {
        self.trivially_infeasible
    }

    /// Adds constraints forcing `ρ(f, t) >= r`.
    pub fn require(
        &mut self,
        model: &mut Model,
        sig: &SignalTable,
        f: &'a Formula,
        t: usize,
        r: f64,
    ) -> Result<(), EncodeError> {
        let end = t + f.horizon();
        if end >= sig.end() || t < sig.start() {
            return Err(EncodeError::SymbolGap(end.max(sig.end())));
        }
        self.force(model, sig, f, false, t, r)
    }

    fn infeasible(&mut self, model: &mut Model) {
        self.trivially_infeasible = true;
        model.add_constraint(LinExpr::zero(), Relation::Ge, 1.0);
    }

    fn force_expr(&mut self, model: &mut Model, e: LinExpr, r: f64) {
        if e.is_constant() {
            if e.constant_part() < r {
                self.infeasible(model);
            }
        } else {
            model.add_constraint(e, Relation::Ge, r);
        }
    }

    fn force_any(&mut self, model: &mut Model, inds: Vec<Ind>) {
        let mut sum = LinExpr::zero();
        for i in inds {
            match i {
                Ind::Const(true) => return,
                Ind::Const(false) => {}
                Ind::Expr(e) => sum += &e,
            }
        }
        if sum.is_constant() {
            self.infeasible(model);
        } else {
            model.add_constraint(sum, Relation::Ge, 1.0);
        }
    }

    fn force(
        &mut self,
        model: &mut Model,
        sig: &SignalTable,
        f: &'a Formula,
        neg: bool,
        t: usize,
        r: f64,
    ) -> Result<(), EncodeError> {
        match (f, neg) {
            (Formula::True, false) => Ok(()),
            (Formula::True, true) => {
                self.infeasible(model);
                Ok(())
            }
            (Formula::Atom(n), false) => {
                let p = self.preds.get(n)?;
                let s = sig.sample(t)?;
                for h in &p.halfspaces {
                    let e = face_expr(h, s);
                    self.force_expr(model, e, r);
                }
                Ok(())
            }
            (Formula::Atom(_), true) => {
                let lits = self.negated_atom_literals(model, sig, f, t, r)?;
                self.force_any(model, lits);
                Ok(())
            }
            (Formula::Not(c), _) => self.force(model, sig, c, !neg, t, r),
            (Formula::And(l, rr), false) | (Formula::Or(l, rr), true) => {
                self.force(model, sig, l, neg, t, r)?;
                self.force(model, sig, rr, neg, t, r)
            }
            (Formula::Or(l, rr), false) | (Formula::And(l, rr), true) => {
                let a = self.indicator(model, sig, l, neg, t, r)?;
                let b = self.indicator(model, sig, rr, neg, t, r)?;
                self.force_any(model, vec![a, b]);
                Ok(())
            }
            (Formula::Globally(i, c), false) | (Formula::Eventually(i, c), true) => {
                for s in t + i.a..=t + i.b {
                    self.force(model, sig, c, neg, s, r)?;
                }
                Ok(())
            }
            (Formula::Eventually(i, c), false) | (Formula::Globally(i, c), true) => {
                let mut inds = Vec::new();
                for s in t + i.a..=t + i.b {
                    inds.push(self.indicator(model, sig, c, neg, s, r)?);
                }
                self.force_any(model, inds);
                Ok(())
            }
            (Formula::Until(..), false) => {
                let w = self.until_witnesses(model, sig, f, t, r)?;
                self.force_any(model, w);
                Ok(())
            }
            (Formula::Until(..), true) => {
                let e = self.exact.rho(model, sig, f, t)?;
                self.force_expr(model, -e, r);
                Ok(())
            }
        }
    }

    fn literal(&mut self, model: &mut Model, faces: Vec<LinExpr>, r: f64) -> Ind {
        let mut open = Vec::new();
        for e in faces {
            if e.is_constant() {
                if e.constant_part() < r {
                    return Ind::Const(false);
                }
            } else {
                open.push(e);
            }
        }
        if open.is_empty() {
            return Ind::Const(true);
        }
        let z = model.add_binary(format!("z{}", model.num_vars()));
        self.binaries += 1;
        let m = self.big_m;
        for e in open {
            // e >= r - M (1 - z)
            model.add_constraint(e + LinExpr::term(z, -m), Relation::Ge, r - m);
        }
        Ind::Expr(LinExpr::var(z))
    }

    fn negated_atom_literals(
        &mut self,
        model: &mut Model,
        sig: &SignalTable,
        f: &'a Formula,
        t: usize,
        r: f64,
    ) -> Result<Vec<Ind>, EncodeError> {
        let Formula::Atom(n) = f else { unreachable!() };
        let p = self.preds.get(n)?;
        let s = sig.sample(t)?.to_vec();
        let faces: Vec<LinExpr> = p.halfspaces.iter().map(|h| -face_expr(h, &s)).collect();
        Ok(faces
            .into_iter()
            .map(|e| self.literal(model, vec![e], r))
            .collect())
    }

    fn all(&mut self, model: &mut Model, inds: Vec<Ind>) -> Ind {
        let mut open = Vec::new();
        for i in inds {
            match i {
                Ind::Const(false) => return Ind::Const(false),
                Ind::Const(true) => {}
                Ind::Expr(e) => open.push(e),
            }
        }
        match open.len() {
            0 => Ind::Const(true),
            1 => Ind::Expr(open.pop().unwrap()),
            _ => {
                let z = model.add_continuous(format!("w{}", model.num_vars()), 0.0, 1.0);
                for e in open {
                    model.add_constraint(LinExpr::var(z) - &e, Relation::Le, 0.0);
                }
                Ind::Expr(LinExpr::var(z))
            }
        }
    }

    fn any(&mut self, model: &mut Model, inds: Vec<Ind>) -> Ind {
        let mut open = Vec::new();
        for i in inds {
            match i {
                Ind::Const(true) => return Ind::Const(true),
                Ind::Const(false) => {}
                Ind::Expr(e) => open.push(e),
            }
        }
        match open.len() {
            0 => Ind::Const(false),
            1 => Ind::Expr(open.pop().unwrap()),
            _ => {
                let z = model.add_continuous(format!("v{}", model.num_vars()), 0.0, 1.0);
                let mut e = LinExpr::var(z);
                for o in &open {
                    e -= o;
                }
                model.add_constraint(e, Relation::Le, 0.0);
                Ind::Expr(LinExpr::var(z))
            }
        }
    }

    fn until_witnesses(
        &mut self,
        model: &mut Model,
        sig: &SignalTable,
        f: &'a Formula,
        t: usize,
        r: f64,
    ) -> Result<Vec<Ind>, EncodeError> {
        let Formula::Until(i, l, rr) = f else { unreachable!() };
        let mut out = Vec::new();
        let mut prefix: Vec<Ind> = Vec::new();
        for s in t + i.a..=t + i.b {
            let mut parts = prefix.clone();
            parts.push(self.indicator(model, sig, rr, false, s, r)?);
            out.push(self.all(model, parts));
            prefix.push(self.indicator(model, sig, l, false, s, r)?);
        }
        Ok(out)
    }

    fn indicator(
        &mut self,
        model: &mut Model,
        sig: &SignalTable,
        f: &'a Formula,
        neg: bool,
        t: usize,
        r: f64,
    ) -> Result<Ind, EncodeError> {
        let key = (f as *const Formula as usize, neg, t, r.to_bits());
        if let Some(i) = self.memo.get(&key) {
            return Ok(i.clone());
        }
        let ind = match (f, neg) {
            (Formula::True, _) => Ind::Const(!neg),
            (Formula::Atom(n), false) => {
                let p = self.preds.get(n)?;
                let s = sig.sample(t)?;
                let faces = p.halfspaces.iter().map(|h| face_expr(h, s)).collect();
                self.literal(model, faces, r)
            }
            (Formula::Atom(_), true) => {
                let lits = self.negated_atom_literals(model, sig, f, t, r)?;
                self.any(model, lits)
            }
            (Formula::Not(c), _) => self.indicator(model, sig, c, !neg, t, r)?,
            (Formula::And(l, rr), false) | (Formula::Or(l, rr), true) => {
                let a = self.indicator(model, sig, l, neg, t, r)?;
                let b = self.indicator(model, sig, rr, neg, t, r)?;
                self.all(model, vec![a, b])
            }
            (Formula::Or(l, rr), false) | (Formula::And(l, rr), true) => {
                let a = self.indicator(model, sig, l, neg, t, r)?;
                let b = self.indicator(model, sig, rr, neg, t, r)?;
                self.any(model, vec![a, b])
            }
            (Formula::Globally(i, c), false) | (Formula::Eventually(i, c), true) => {
                let mut inds = Vec::new();
                for s in t + i.a..=t + i.b {
                    inds.push(self.indicator(model, sig, c, neg, s, r)?);
                }
                self.all(model, inds)
            }
            (Formula::Eventually(i, c), false) | (Formula::Globally(i, c), true) => {
                let mut inds = Vec::new();
                for s in t + i.a..=t + i.b {
                    inds.push(self.indicator(model, sig, c, neg, s, r)?);
                }
                self.any(model, inds)
            }
            (Formula::Until(..), false) => {
                let w = self.until_witnesses(model, sig, f, t, r)?;
                self.any(model, w)
            }
            (Formula::Until(..), true) => {
                let e = -self.exact.rho(model, sig, f, t)?;
                self.literal(model, vec![e], r)
            }
        };
        self.memo.insert(key, ind.clone());
        Ok(ind)
    }
}
