use std::fmt::Write;

use super::{LpModel, Sense};

fn term(out: &mut String, first: bool, coef: f64, name: &str) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {name}", -coef);
    } else if first {
        let _ = write!(out, " {coef} {name}");
    } else {
        let _ = write!(out, " + {coef} {name}");
    }
}

fn bound(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// Renders the model in the CPLEX LP text format.
///
/// Numbers use Rust's shortest round-trip representation so a reader
/// recovers every coefficient exactly. The objective offset is emitted as a
/// comment since the format has no portable constant term.
pub fn write_lp_format(model: &LpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ objective offset: {}", model.objective_offset);
    out.push_str("Minimize\n obj:");
    let mut first = true;
    for (j, &c) in model.objective.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, first, c, &model.col_names[j]);
            first = false;
        }
    }
    if first {
        let _ = write!(out, " 0 {}", model.col_names.first().map(String::as_str).unwrap_or("x"));
    }
    out.push_str("\nSubject To\n");
    for r in &model.rows {
        let _ = write!(out, " {}:", r.name);
        let mut first = true;
        for &(j, a) in &r.coefs {
            term(&mut out, first, a, &model.col_names[j]);
            first = false;
        }
        let op = match r.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", r.rhs);
    }
    out.push_str("Bounds\n");
    for j in 0..model.n_cols() {
        let (l, u) = (model.lower[j], model.upper[j]);
        let name = &model.col_names[j];
        if l == u {
            let _ = writeln!(out, " {name} = {l}");
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", bound(l), bound(u));
        }
    }
    let ints: Vec<&str> = (0..model.n_cols())
        .filter(|&j| model.integer[j])
        .map(|j| model.col_names[j].as_str())
        .collect();
    if !ints.is_empty() {
        out.push_str("Generals\n");
        for chunk in ints.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}
