//! Plain-text dump in a CPLEX-LP-like layout, one constraint per line.

use std::fmt::Write as _;

use crate::model::{LinExpr, Model, VarKind};

fn push_expr(out: &mut String, model: &Model, e: &LinExpr) {
    if e.terms().is_empty() {
        out.push_str("0");
        return;
    }
    for (k, &(v, c)) in e.terms().iter().enumerate() {
        let name = &model.var(v).name;
        if k == 0 {
            let _ = write!(out, "{c} {name}");
        } else if c < 0.0 {
            let _ = write!(out, " - {} {name}", -c);
        } else {
            let _ = write!(out, " + {c} {name}");
        }
    }
}

/// Renders the model for cross-checking against external solvers.
pub fn write_lp(model: &Model) -> String {
    let mut out = String::from("Minimize\n obj: ");
    push_expr(&mut out, model, model.objective());
    out.push_str("\nSubject To\n");
    for (r, c) in model.constraints().iter().enumerate() {
        let name = c.name.clone().unwrap_or_else(|| format!("c{r}"));
        let _ = write!(out, " {name}: ");
        push_expr(&mut out, model, &c.expr);
        let _ = writeln!(out, " {} {}", c.relation, c.rhs);
    }
    out.push_str("Bounds\n");
    for v in model.vars() {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {} free", v.name);
            }
            (true, false) => {
                let _ = writeln!(out, " {} >= {}", v.name, v.lower);
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {} <= {}", v.name, v.upper);
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
            }
        }
    }
    let bins: Vec<&str> = model
        .vars()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !bins.is_empty() {
        out.push_str("Binary\n");
        for b in bins {
            let _ = writeln!(out, " {b}");
        }
    }
    out.push_str("End\n");
    out
}
