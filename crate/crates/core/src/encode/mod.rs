//! MILP encodings of robustness constraints and the confidence-level
//! recursion for estimated signals.

mod confidence;
mod exact;
mod requirement;

pub use confidence::{confidence_lower_bound, required_rmin, ConfidenceMode};
pub use exact::{encode_robustness, encode_robustness_expr, RobustnessVar};
pub use requirement::RequirementEncoder;

use milp::{LinExpr, Model, Relation, VarId};
use thiserror::Error;

use crate::mtl::MtlError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error(transparent)]
    Mtl(#[from] MtlError),
    #[error("no signal sample at time {0}")]
    SymbolGap(usize),
    #[error("robustness variable {value} within 1e-3 of the big-M bound {big_m}")]
    BigMTooSmall { value: f64, big_m: f64 },
    #[error("minimum robustness must be positive, got {0}")]
    NonPositiveRmin(f64),
    #[error("confidence target {gamma} unreachable (bound capped at {best})")]
    Unreachable { gamma: f64, best: f64 },
    #[error("confidence recursion undefined for {0}")]
    Unsupported(String),
    #[error("error bound sequence has {len} entries, need {needed}")]
    ShortErrorBound { needed: usize, len: usize },
    #[error("invalid encoding parameter: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodingConfig {
    pub big_m: f64,
    pub r_min: f64,
    /// Absolute time of the first sample the encoded window refers to.
    pub window_offset: usize,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            big_m: 1000.0,
            r_min: 0.0,
            window_offset: 0,
        }
    }
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<(), EncodeError> {
        if !(self.big_m > 0.0) || !self.big_m.is_finite() {
            return Err(EncodeError::InvalidConfig(format!("big_m = {}", self.big_m)));
        }
        if !(self.r_min >= 0.0) {
            return Err(EncodeError::InvalidConfig(format!("r_min = {}", self.r_min)));
        }
        Ok(())
    }
}

/// Time-indexed affine expressions for each signal coordinate.
///
/// Samples may be plain constants, model variables, or affine functions of
/// other decision variables.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalTable {
    start: usize,
    rows: Vec<Vec<LinExpr>>,
}

impl SignalTable {
    pub fn new(start: usize, rows: Vec<Vec<LinExpr>>) -> Self {
        Self { start, rows }
    }

    pub fn from_values(start: usize, values: &[Vec<f64>]) -> Self {
        let rows = values
            .iter()
            .map(|r| r.iter().map(|&v| LinExpr::constant(v)).collect())
            .collect();
        Self { start, rows }
    }

    /// One continuous variable per sample, pinned to `values` by equality rows.
    pub fn pinned_vars(model: &mut Model, start: usize, values: &[Vec<f64>]) -> Self {
        let mut rows = Vec::with_capacity(values.len());
        for (k, r) in values.iter().enumerate() {
            let mut row = Vec::with_capacity(r.len());
            for (d, &v) in r.iter().enumerate() {
                let x: VarId = model.add_continuous(format!("s_{}_{d}", start + k), v, v);
                model.add_constraint(LinExpr::var(x), Relation::Eq, v);
                row.push(LinExpr::var(x));
            }
            rows.push(row);
        }
        Self { start, rows }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// One past the last covered time.
    pub fn end(&self) -> usize {
        self.start + self.rows.len()
    }

    pub fn sample(&self, t: usize) -> Result<&[LinExpr], EncodeError> {
        if t < self.start {
            return Err(EncodeError::SymbolGap(t));
        }
        self.rows
            .get(t - self.start)
            .map(|r| r.as_slice())
            .ok_or(EncodeError::SymbolGap(t))
    }

    pub fn eval(&self, values: &[f64]) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|e| e.eval(values)).collect())
            .collect()
    }
}

/// Affine expression for the scaled slack of `h` at a symbolic sample.
pub(crate) fn face_expr(h: &crate::mtl::Halfspace, s: &[LinExpr]) -> LinExpr {
    let n = h.norm();
    let mut e = LinExpr::constant(h.offset / n);
    for (a, x) in h.normal.iter().zip(s) {
        if *a != 0.0 {
            e.add_scaled(x, -a / n);
        }
    }
    e
}
