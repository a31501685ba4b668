//! Discrete-time MTL over affine-region predicates.

mod eval;
mod parse;

pub use eval::{boolean_sat, robustness, signed_distance};
pub use parse::parse;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MtlError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("malformed interval [{a},{b}]")]
    BadInterval { a: i64, b: i64 },
    #[error("invalid predicate `{name}`: {msg}")]
    InvalidPredicate { name: String, msg: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("trajectory of length {len} too short: need {needed} samples")]
    TooShort { needed: usize, len: usize },
    #[error("empty predicate table")]
    NoPredicates,
}

/// Closed interval `[a, b]` of time steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub a: usize,
    pub b: usize,
}

impl Interval {
    pub fn new(a: usize, b: usize) -> Result<Self, MtlError> {
        if a > b {
            return Err(MtlError::BadInterval {
                a: a as i64,
                b: b as i64,
            });
        }
        Ok(Self { a, b })
    }
}

/// `{s : normal · s <= offset}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn norm(&self) -> f64 {
        self.normal.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Scaled slack `(offset - n·s) / |n|`.
    pub fn slack(&self, s: &[f64]) -> f64 {
        let dot: f64 = self.normal.iter().zip(s).map(|(n, x)| n * x).sum();
        (self.offset - dot) / self.norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Predicate {
    pub name: String,
    pub halfspaces: Vec<Halfspace>,
}

impl Predicate {
    pub fn new(name: impl Into<String>, halfspaces: Vec<Halfspace>) -> Result<Self, MtlError> {
        let name = name.into();
        let bad = |msg: &str| MtlError::InvalidPredicate {
            name: name.clone(),
            msg: msg.to_string(),
        };
        let first = halfspaces.first().ok_or_else(|| bad("no halfspaces"))?;
        let dim = first.normal.len();
        for h in &halfspaces {
            if h.normal.len() != dim {
                return Err(bad("normals of different lengths"));
            }
            if !(h.norm() > 0.0) || !h.offset.is_finite() {
                return Err(bad("zero or non-finite normal"));
            }
        }
        Ok(Self { name, halfspaces })
    }

    /// Axis-aligned box `lo <= s <= hi`.
    pub fn boxed(name: impl Into<String>, lo: &[f64], hi: &[f64]) -> Result<Self, MtlError> {
        let name = name.into();
        if lo.len() != hi.len() || lo.iter().zip(hi).any(|(l, h)| l > h) {
            return Err(MtlError::InvalidPredicate {
                name,
                msg: "box bounds inconsistent".into(),
            });
        }
        let d = lo.len();
        let mut hs = Vec::with_capacity(2 * d);
        for k in 0..d {
            let mut n = vec![0.0; d];
            n[k] = 1.0;
            hs.push(Halfspace {
                normal: n.clone(),
                offset: hi[k],
            });
            n[k] = -1.0;
            hs.push(Halfspace {
                normal: n,
                offset: -lo[k],
            });
        }
        Self::new(name, hs)
    }

    pub fn dim(&self) -> usize {
        self.halfspaces[0].normal.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PredicateTable {
    preds: BTreeMap<String, Predicate>,
}

impl PredicateTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, p: Predicate) {
        self.preds.insert(p.name.clone(), p);
    }

    pub fn get(&self, name: &str) -> Result<&Predicate, MtlError> {
        self.preds
            .get(name)
            .ok_or_else(|| MtlError::UnknownPredicate(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.preds.contains_key(name)
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Predicate> {
        self.preds.values()
    }
}

impl FromIterator<Predicate> for PredicateTable {
    fn from_iter<I: IntoIterator<Item = Predicate>>(iter: I) -> Self {
        let mut t = Self::new();
        for p in iter {
            t.insert(p);
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    True,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Until(Interval, Box<Formula>, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Globally(Interval, Box<Formula>),
}

impl Formula {
    pub fn atom(name: &str) -> Self {
        Formula::Atom(name.to_string())
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn until(a: usize, b: usize, l: Formula, r: Formula) -> Self {
        Formula::Until(Interval { a, b }, Box::new(l), Box::new(r))
    }

    pub fn eventually(a: usize, b: usize, f: Formula) -> Self {
        Formula::Eventually(Interval { a, b }, Box::new(f))
    }

    pub fn globally(a: usize, b: usize, f: Formula) -> Self {
        Formula::Globally(Interval { a, b }, Box::new(f))
    }

    /// Number of future steps needed to decide the formula.
    pub fn horizon(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 0,
            Formula::Not(f) => f.horizon(),
            Formula::And(l, r) | Formula::Or(l, r) => l.horizon().max(r.horizon()),
            Formula::Until(i, l, r) => i.b + l.horizon().max(r.horizon()),
            Formula::Eventually(i, f) | Formula::Globally(i, f) => i.b + f.horizon(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 0,
            Formula::Not(f) | Formula::Eventually(_, f) | Formula::Globally(_, f) => 1 + f.depth(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Until(_, l, r) => {
                1 + l.depth().max(r.depth())
            }
        }
    }

    pub fn atoms(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Formula::True => {}
            Formula::Atom(n) => out.push(n),
            Formula::Not(f) | Formula::Eventually(_, f) | Formula::Globally(_, f) => {
                f.collect_atoms(out)
            }
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Until(_, l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
        }
    }

    /// Checks that every atom is declared and has dimension `dim`.
    pub fn check(&self, preds: &PredicateTable, dim: usize) -> Result<(), MtlError> {
        for a in self.atoms() {
            let p = preds.get(a)?;
            if p.dim() != dim {
                return Err(MtlError::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
        }
        Ok(())
    }
}

/// Canonical, fully parenthesised form accepted back by [`parse`].
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::Atom(n) => write!(f, "{n}"),
            Formula::Not(c) => write!(f, "!({c})"),
            Formula::And(l, r) => write!(f, "({l} & {r})"),
            Formula::Or(l, r) => write!(f, "({l} | {r})"),
            Formula::Until(i, l, r) => write!(f, "({l} U[{},{}] {r})", i.a, i.b),
            Formula::Eventually(i, c) => write!(f, "F[{},{}]({c})", i.a, i.b),
            Formula::Globally(i, c) => write!(f, "G[{},{}]({c})", i.a, i.b),
        }
    }
}

/// Sampled signal, one state vector per time step starting at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    samples: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self, MtlError> {
        let dim = samples
            .first()
            .ok_or(MtlError::TooShort { needed: 1, len: 0 })?
            .len();
        if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
            return Err(MtlError::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Ok(Self { samples })
    }

    pub fn constant(point: &[f64], len: usize) -> Self {
        Self {
            samples: vec![point.to_vec(); len.max(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn at(&self, t: usize) -> &[f64] {
        &self.samples[t]
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }
}
