use std::fmt::Write as _;
use std::io::{self, Write};

use super::{LpProblem, Sense};

/// Writes `problem` in CPLEX LP text format for cross-checking with external
/// solvers. Names are sanitized to the characters that format accepts.
pub fn write_lp_format<W: Write>(problem: &LpProblem, out: &mut W) -> io::Result<()> {
    let names: Vec<String> = problem
        .vars
        .iter()
        .enumerate()
        .map(|(j, v)| sanitize(&v.name, 'x', j))
        .collect();

    writeln!(out, "\\ generated by cep-eens")?;
    writeln!(out, "Minimize")?;
    let mut line = String::from(" obj:");
    let mut any = false;
    for (j, v) in problem.vars.iter().enumerate() {
        if v.cost != 0.0 {
            push_term(&mut line, v.cost, &names[j]);
            any = true;
        }
    }
    if !any {
        line.push_str(" 0 ");
        line.push_str(names.first().map(String::as_str).unwrap_or("dummy"));
    }
    writeln!(out, "{line}")?;

    writeln!(out, "Subject To")?;
    for (i, row) in problem.rows.iter().enumerate() {
        let mut line = format!(" {}:", sanitize(&row.name, 'r', i));
        if row.terms.is_empty() {
            line.push_str(" 0 ");
            line.push_str(names.first().map(String::as_str).unwrap_or("dummy"));
        }
        for (v, a) in &row.terms {
            push_term(&mut line, *a, &names[v.0]);
        }
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = write!(line, " {op} {}", row.rhs);
        writeln!(out, "{line}")?;
    }

    writeln!(out, "Bounds")?;
    for (j, v) in problem.vars.iter().enumerate() {
        let n = &names[j];
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) if v.lower == v.upper => writeln!(out, " {n} = {}", v.lower)?,
            (true, true) => writeln!(out, " {} <= {n} <= {}", v.lower, v.upper)?,
            (true, false) => writeln!(out, " {n} >= {}", v.lower)?,
            (false, true) => writeln!(out, " -inf <= {n} <= {}", v.upper)?,
            (false, false) => writeln!(out, " {n} free")?,
        }
    }
    writeln!(out, "End")
}

fn push_term(line: &mut String, coef: f64, name: &str) {
    if coef < 0.0 {
        let _ = write!(line, " - {} {name}", -coef);
    } else {
        let _ = write!(line, " + {coef} {name}");
    }
}

fn sanitize(name: &str, prefix: char, idx: usize) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect();
    if cleaned.is_empty() || cleaned.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        format!("{prefix}{idx}_{cleaned}")
    } else {
        cleaned
    }
}
