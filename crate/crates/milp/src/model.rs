//! Model container: variables, linear constraints and a minimization objective.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::SolveError;

/// Index of a variable inside a [`Model`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// Affine expression `sum(coef * var) + constant`.
///
/// Terms are kept sorted by variable index with no duplicate entries, so
/// adding two expressions is a linear merge.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn var(v: VarId) -> Self {
        Self::term(v, 1.0)
    }

    pub fn term(v: VarId, coef: f64) -> Self {
        let terms = if coef == 0.0 { Vec::new() } else { vec![(v, coef)] };
        Self {
            terms,
            constant: 0.0,
        }
    }

    pub fn terms(&self) -> &[(VarId, f64)] {
        &self.terms
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn add_term(&mut self, v: VarId, coef: f64) {
        if coef == 0.0 {
            return;
        }
        match self.terms.binary_search_by_key(&v, |&(id, _)| id) {
            Ok(pos) => {
                self.terms[pos].1 += coef;
                if self.terms[pos].1 == 0.0 {
                    self.terms.remove(pos);
                }
            }
            Err(pos) => self.terms.insert(pos, (v, coef)),
        }
    }

    /// `self += k * other`
    pub fn add_scaled(&mut self, other: &LinExpr, k: f64) {
        if k == 0.0 {
            return;
        }
        self.constant += k * other.constant;
        if other.terms.is_empty() {
            return;
        }
        if self.terms.is_empty() {
            self.terms = other.terms.iter().map(|&(v, c)| (v, c * k)).collect();
            return;
        }
        let mut merged = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    merged.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    merged.push((b[j].0, b[j].1 * k));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let c = a[i].1 + b[j].1 * k;
                    if c != 0.0 {
                        merged.push((a[i].0, c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        merged.extend_from_slice(&a[i..]);
        merged.extend(b[j..].iter().map(|&(v, c)| (v, c * k)));
        self.terms = merged;
    }

    pub fn scaled(&self, k: f64) -> LinExpr {
        if k == 0.0 {
            return LinExpr::zero();
        }
        LinExpr {
            terms: self.terms.iter().map(|&(v, c)| (v, c * k)).collect(),
            constant: self.constant * k,
        }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(v, c)| acc + c * values[v.0])
    }

    pub fn max_var(&self) -> Option<VarId> {
        self.terms.last().map(|&(v, _)| v)
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::var(v)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

impl SubAssign<&LinExpr> for LinExpr {
    fn sub_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, -1.0);
    }
}

impl Add<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn add(self, rhs: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl Sub<&LinExpr> for &LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl Add<&LinExpr> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: &LinExpr) -> LinExpr {
        self.add_scaled(rhs, 1.0);
        self
    }
}

impl Sub<&LinExpr> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: &LinExpr) -> LinExpr {
        self.add_scaled(rhs, -1.0);
        self
    }
}

impl Add<f64> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: f64) -> LinExpr {
        self.constant += rhs;
        self
    }
}

impl Mul<f64> for &LinExpr {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        self.scaled(rhs)
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        self.scaled(rhs)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

/// A row `expr (<=|=|>=) rhs`; the expression carries no constant.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: Option<String>,
    pub expr: LinExpr,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.expr.eval(values)
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Mixed 0/1 linear program, always a minimization.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Model {
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: LinExpr,
}

impl Model {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: f64,
        upper: f64,
    ) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        self.vars.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    /// Adds `expr rel rhs`; any constant in `expr` is moved to the right side.
    pub fn add_constraint(&mut self, expr: LinExpr, relation: Relation, rhs: f64) -> usize {
        self.push_constraint(None, expr, relation, rhs)
    }

    pub fn add_named_constraint(
        &mut self,
        name: impl Into<String>,
        expr: LinExpr,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.push_constraint(Some(name.into()), expr, relation, rhs)
    }

    fn push_constraint(
        &mut self,
        name: Option<String>,
        mut expr: LinExpr,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        let rhs = rhs - expr.constant;
        expr.constant = 0.0;
        self.constraints.push(Constraint {
            name,
            expr,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, objective: LinExpr) {
        self.objective = objective;
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        let var = &mut self.vars[v.0];
        var.lower = lower;
        var.upper = upper;
    }

    /// Pins `v` to `value` through its bounds.
    pub fn fix(&mut self, v: VarId, value: f64) {
        self.set_bounds(v, value, value);
    }

    /// Interval of values `e` can take under the variable bounds alone.
    pub fn bounds_of(&self, e: &LinExpr) -> (f64, f64) {
        let (mut lo, mut hi) = (e.constant_part(), e.constant_part());
        for &(v, a) in e.terms() {
            let var = &self.vars[v.0];
            let (l, u) = if a >= 0.0 { (var.lower, var.upper) } else { (var.upper, var.lower) };
            lo += a * l;
            hi += a * u;
        }
        (lo, hi)
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    /// Checks bound ordering, binary bounds and variable references.
    pub fn validate(&self) -> Result<(), SolveError> {
        for (i, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(SolveError::InvalidModel(format!(
                    "variable {i} ({}) has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(SolveError::InvalidModel(format!(
                    "binary variable {i} ({}) bounds outside [0, 1]",
                    v.name
                )));
            }
        }
        let n = self.vars.len();
        let check = |e: &LinExpr, what: &str| -> Result<(), SolveError> {
            if let Some(v) = e.max_var() {
                if v.0 >= n {
                    return Err(SolveError::InvalidModel(format!(
                        "{what} references undeclared variable {}",
                        v.0
                    )));
                }
            }
            if e.terms.iter().any(|&(_, c)| !c.is_finite()) {
                return Err(SolveError::InvalidModel(format!(
                    "{what} has a non-finite coefficient"
                )));
            }
            Ok(())
        };
        for (r, c) in self.constraints.iter().enumerate() {
            check(&c.expr, &format!("constraint {r}"))?;
            if c.rhs.is_nan() {
                return Err(SolveError::InvalidModel(format!("constraint {r} has NaN rhs")));
            }
        }
        check(&self.objective, "objective")
    }

    /// Largest bound or row violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(0.0, f64::max);
        self.vars
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(rows, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_keeps_sorted_and_drops_zeros() {
        let mut a = LinExpr::term(VarId(3), 2.0);
        a.add_term(VarId(1), 1.0);
        let mut b = LinExpr::term(VarId(3), -2.0);
        b.add_term(VarId(2), 5.0);
        b.add_constant(4.0);
        a += &b;
        assert_eq!(a.terms(), &[(VarId(1), 1.0), (VarId(2), 5.0)]);
        assert_eq!(a.constant_part(), 4.0);
    }

    #[test]
    fn constraint_constant_moves_to_rhs() {
        let mut m = Model::new();
        let x = m.add_continuous("x", 0.0, 10.0);
        m.add_constraint(LinExpr::var(x) + 2.0, Relation::Le, 5.0);
        assert_eq!(m.constraints()[0].rhs, 3.0);
        assert_eq!(m.constraints()[0].expr.constant_part(), 0.0);
    }

    #[test]
    fn validate_rejects_inverted_bounds_and_unknown_vars() {
        let mut m = Model::new();
        let x = m.add_continuous("x", 1.0, 0.0);
        assert!(m.validate().is_err());
        m.set_bounds(x, 0.0, 1.0);
        m.add_constraint(LinExpr::var(VarId(7)), Relation::Le, 1.0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn interval_bounds_follow_coefficient_signs() {
        let mut m = Model::new();
        let x = m.add_continuous("x", -1.0, 2.0);
        let y = m.add_free("y");
        let mut e = LinExpr::term(x, -3.0);
        e.add_constant(1.0);
        assert_eq!(m.bounds_of(&e), (-5.0, 4.0));
        e.add_term(y, 1.0);
        assert_eq!(m.bounds_of(&e), (f64::NEG_INFINITY, f64::INFINITY));
    }
}
