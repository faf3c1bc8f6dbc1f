//! CPLEX-style LP text format: deterministic writer and a parser for the
//! same dialect. The parser ignores comments, so annotated exports
//! round-trip to identical rows.
//!
//! Grammar subset handled by the parser:
//!   - sections: Minimize/Maximize, Subject To (ST, S.T.), Bounds,
//!     Binaries/Binary/Bin, Generals/General/Gen, End
//!   - rows: `name: [+|-] [coef] var ... (<=|>=|=) rhs`, free wrapping
//!   - bounds: `l <= x <= u`, `x <= u`, `x >= l`, `x = v`, `x free`,
//!     with `-inf`/`+inf` accepted
//!   - comments: `\` to end of line

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::milp::{MilpModel, Sense};
use crate::solver::SolveError;

/// Shortest round-trip float formatting keeps exports byte-stable.
fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

pub fn write_lp(model: &MilpModel, annotate: bool) -> Result<String, SolveError> {
    let mut seen = HashMap::new();
    for (i, v) in model.vars.iter().enumerate() {
        if let Some(prev) = seen.insert(v.name.as_str(), i) {
            return Err(SolveError::Export(format!(
                "variable name {} used by #{prev} and #{i}",
                v.name
            )));
        }
    }

    let mut out = String::new();
    out.push_str("\\ gridmend model export\n");
    if model.objective_offset != 0.0 {
        let _ = writeln!(out, "\\ objective offset: {}", fmt_num(model.objective_offset));
    }
    out.push_str("Minimize\n obj:");
    if model.objective.is_empty() {
        // LP files need at least one objective term.
        out.push_str(" 0 ");
        out.push_str(&model.vars[0].name);
    } else {
        for (k, (var, coef)) in model.objective.iter().enumerate() {
            push_term(&mut out, k == 0, *coef, &model.vars[var.0].name);
        }
    }
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        if annotate {
            let _ = writeln!(out, "\\ {:?} [{:?}]", row.tag, row.tag.family());
        }
        let _ = write!(out, " {}:", row.name);
        for (k, (var, coef)) in row.terms.iter().enumerate() {
            push_term(&mut out, k == 0, *coef, &model.vars[var.0].name);
        }
        let sense = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {sense} {}", fmt_num(row.rhs));
    }

    out.push_str("Bounds\n");
    for v in &model.vars {
        if v.lb == v.ub {
            let _ = writeln!(out, " {} = {}", v.name, fmt_num(v.lb));
        } else if v.integer && v.lb == 0.0 && v.ub == 1.0 {
            // Default binary range, implied by the Binaries section.
        } else {
            let lb = if v.lb == f64::NEG_INFINITY {
                "-inf".to_string()
            } else {
                fmt_num(v.lb)
            };
            let ub = if v.ub == f64::INFINITY {
                "+inf".to_string()
            } else {
                fmt_num(v.ub)
            };
            let _ = writeln!(out, " {lb} <= {} <= {ub}", v.name);
        }
    }
    let binaries: Vec<&str> = model
        .vars
        .iter()
        .filter(|v| v.integer)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for name in binaries {
            let _ = writeln!(out, " {name}");
        }
    }
    out.push_str("End\n");
    Ok(out)
}

fn push_term(out: &mut String, first: bool, coef: f64, name: &str) {
    if coef >= 0.0 {
        if !first {
            out.push_str(" +");
        } else {
            out.push(' ');
        }
        if coef != 1.0 {
            out.push_str(&fmt_num(coef));
            out.push(' ');
        }
    } else {
        out.push_str(" - ");
        if coef != -1.0 {
            out.push_str(&fmt_num(-coef));
            out.push(' ');
        }
    }
    out.push_str(name);
}

// ---------------------------------------------------------------------------
// Parser

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRow {
    pub name: String,
    pub terms: Vec<(String, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedLp {
    pub minimize: bool,
    pub objective: Vec<(String, f64)>,
    pub rows: Vec<ParsedRow>,
    /// Explicit bounds; variables not listed default to [0, +inf).
    pub bounds: HashMap<String, (f64, f64)>,
    pub binaries: Vec<String>,
    pub generals: Vec<String>,
}

impl ParsedLp {
    /// Variables in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        let mut visit = |name: &String| {
            if !seen.contains_key(name) {
                seen.insert(name.clone(), ());
                out.push(name.clone());
            }
        };
        for (n, _) in &self.objective {
            visit(n);
        }
        for r in &self.rows {
            for (n, _) in &r.terms {
                visit(n);
            }
        }
        for n in self.bounds.keys() {
            visit(n);
        }
        for n in self.binaries.iter().chain(self.generals.iter()) {
            visit(n);
        }
        out
    }

    pub fn bounds_of(&self, name: &str) -> (f64, f64) {
        if let Some(b) = self.bounds.get(name) {
            return *b;
        }
        if self.binaries.iter().any(|b| b == name) {
            (0.0, 1.0)
        } else {
            (0.0, f64::INFINITY)
        }
    }

    pub fn is_integer(&self, name: &str) -> bool {
        self.binaries.iter().any(|b| b == name) || self.generals.iter().any(|b| b == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(f64),
    Plus,
    Minus,
    Le,
    Ge,
    Eq,
    Colon,
}

fn tokenize(text: &str) -> Result<Vec<Tok>, SolveError> {
    let mut toks = Vec::new();
    for line in text.lines() {
        let line = match line.find('\\') {
            Some(k) => &line[..k],
            None => line,
        };
        let mut chars = line.chars().peekable();
        while let Some(&c) = chars.peek() {
            match c {
                ' ' | '\t' | '\r' => {
                    chars.next();
                }
                '+' => {
                    chars.next();
                    toks.push(Tok::Plus);
                }
                '-' => {
                    chars.next();
                    toks.push(Tok::Minus);
                }
                ':' => {
                    chars.next();
                    toks.push(Tok::Colon);
                }
                '<' | '>' | '=' => {
                    chars.next();
                    if chars.peek() == Some(&'=') {
                        chars.next();
                    }
                    toks.push(match c {
                        '<' => Tok::Le,
                        '>' => Tok::Ge,
                        _ => Tok::Eq,
                    });
                }
                c if c.is_ascii_digit() || c == '.' => {
                    let mut s = String::new();
                    while let Some(&d) = chars.peek() {
                        if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' {
                            s.push(d);
                            chars.next();
                            if (s.ends_with('e') || s.ends_with('E'))
                                && matches!(chars.peek(), Some('+') | Some('-'))
                            {
                                s.push(chars.next().unwrap());
                            }
                        } else {
                            break;
                        }
                    }
                    let v: f64 = s
                        .parse()
                        .map_err(|_| SolveError::Unparseable(format!("bad number {s:?}")))?;
                    toks.push(Tok::Num(v));
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut s = String::new();
                    while let Some(&d) = chars.peek() {
                        if d.is_ascii_alphanumeric() || d == '_' || d == '.' {
                            s.push(d);
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    toks.push(Tok::Word(s));
                }
                other => {
                    return Err(SolveError::Unparseable(format!(
                        "unexpected character {other:?} in LP text"
                    )))
                }
            }
        }
    }
    Ok(toks)
}

fn keyword(toks: &[Tok], at: usize) -> Option<(&'static str, usize)> {
    let word = |k: usize| match toks.get(k) {
        Some(Tok::Word(w)) => Some(w.to_ascii_lowercase()),
        _ => None,
    };
    let w0 = word(at)?;
    match w0.as_str() {
        "minimize" | "min" | "minimise" => Some(("min", 1)),
        "maximize" | "max" | "maximise" => Some(("max", 1)),
        "subject" => {
            if word(at + 1).as_deref() == Some("to") {
                Some(("st", 2))
            } else {
                None
            }
        }
        "st" | "s.t." | "such" => Some(("st", 1)),
        "bounds" | "bound" => Some(("bounds", 1)),
        "binaries" | "binary" | "bin" => Some(("bin", 1)),
        "generals" | "general" | "gen" => Some(("gen", 1)),
        "end" => Some(("end", 1)),
        _ => None,
    }
}

/// Parse `[+|-] [num] word ...` until a sense token; returns the linear
/// terms plus any accumulated constant.
fn parse_expr(toks: &[Tok], mut at: usize) -> (Vec<(String, f64)>, f64, usize) {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut sign = 1.0;
    let mut pending: Option<f64> = None;
    while at < toks.len() {
        match &toks[at] {
            Tok::Plus => {
                if let Some(c) = pending.take() {
                    constant += sign * c;
                }
                sign = 1.0;
                at += 1;
            }
            Tok::Minus => {
                if let Some(c) = pending.take() {
                    constant += sign * c;
                }
                sign = -1.0;
                at += 1;
            }
            Tok::Num(v) => {
                if let Some(c) = pending.take() {
                    // Two numbers in a row: fold the first as a constant.
                    constant += sign * c;
                }
                pending = Some(*v);
                at += 1;
            }
            Tok::Word(w) if keyword(toks, at).is_none() => {
                let coef = sign * pending.take().unwrap_or(1.0);
                terms.push((w.clone(), coef));
                sign = 1.0;
                at += 1;
            }
            _ => break,
        }
    }
    if let Some(c) = pending.take() {
        constant += sign * c;
    }
    (terms, constant, at)
}

pub fn parse_lp(text: &str) -> Result<ParsedLp, SolveError> {
    let toks = tokenize(text)?;
    let mut lp = ParsedLp {
        minimize: true,
        ..Default::default()
    };
    let mut at = 0;

    let Some((kw, skip)) = keyword(&toks, at) else {
        return Err(SolveError::Unparseable("expected objective section".into()));
    };
    if kw != "min" && kw != "max" {
        return Err(SolveError::Unparseable("expected Minimize or Maximize".into()));
    }
    lp.minimize = kw == "min";
    at += skip;

    // Optional objective name.
    if matches!(
        (toks.get(at), toks.get(at + 1)),
        (Some(Tok::Word(_)), Some(Tok::Colon))
    ) {
        at += 2;
    }
    let (obj, _, next) = parse_expr(&toks, at);
    lp.objective = obj;
    at = next;

    let Some(("st", skip)) = keyword(&toks, at) else {
        return Err(SolveError::Unparseable("expected Subject To".into()));
    };
    at += skip;

    let mut anon = 0usize;
    loop {
        if let Some((kw, skip)) = keyword(&toks, at) {
            at += skip;
            match kw {
                "bounds" => {
                    at = parse_bounds(&toks, at, &mut lp)?;
                }
                "bin" => {
                    at = parse_name_list(&toks, at, &mut lp.binaries);
                }
                "gen" => {
                    at = parse_name_list(&toks, at, &mut lp.generals);
                }
                "end" => break,
                other => {
                    return Err(SolveError::Unparseable(format!(
                        "unexpected section {other:?}"
                    )))
                }
            }
            continue;
        }
        if at >= toks.len() {
            break;
        }
        // A constraint row, optionally named.
        let name = if matches!(
            (toks.get(at), toks.get(at + 1)),
            (Some(Tok::Word(_)), Some(Tok::Colon))
        ) {
            let Tok::Word(w) = &toks[at] else { unreachable!() };
            at += 2;
            w.clone()
        } else {
            anon += 1;
            format!("r{anon}")
        };
        let (terms, constant, next) = parse_expr(&toks, at);
        at = next;
        let sense = match toks.get(at) {
            Some(Tok::Le) => Sense::Le,
            Some(Tok::Ge) => Sense::Ge,
            Some(Tok::Eq) => Sense::Eq,
            other => {
                return Err(SolveError::Unparseable(format!(
                    "row {name}: expected a sense, found {other:?}"
                )))
            }
        };
        at += 1;
        let (rhs_terms, rhs_const, next) = parse_expr(&toks, at);
        if !rhs_terms.is_empty() {
            return Err(SolveError::Unparseable(format!(
                "row {name}: variables on the right-hand side are not supported"
            )));
        }
        at = next;
        lp.rows.push(ParsedRow {
            name,
            terms,
            sense,
            rhs: rhs_const - constant,
        });
    }
    Ok(lp)
}

fn parse_name_list(toks: &[Tok], mut at: usize, out: &mut Vec<String>) -> usize {
    while let Some(Tok::Word(w)) = toks.get(at) {
        if keyword(toks, at).is_some() {
            break;
        }
        out.push(w.clone());
        at += 1;
    }
    at
}

fn num_or_inf(toks: &[Tok], at: usize) -> Option<(f64, usize)> {
    match toks.get(at) {
        Some(Tok::Num(v)) => Some((*v, at + 1)),
        Some(Tok::Plus) => match toks.get(at + 1) {
            Some(Tok::Num(v)) => Some((*v, at + 2)),
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("inf") || w.eq_ignore_ascii_case("infinity") => {
                Some((f64::INFINITY, at + 2))
            }
            _ => None,
        },
        Some(Tok::Minus) => match toks.get(at + 1) {
            Some(Tok::Num(v)) => Some((-v, at + 2)),
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("inf") || w.eq_ignore_ascii_case("infinity") => {
                Some((f64::NEG_INFINITY, at + 2))
            }
            _ => None,
        },
        Some(Tok::Word(w)) if w.eq_ignore_ascii_case("inf") => Some((f64::INFINITY, at + 1)),
        _ => None,
    }
}

fn parse_bounds(toks: &[Tok], mut at: usize, lp: &mut ParsedLp) -> Result<usize, SolveError> {
    loop {
        if keyword(toks, at).is_some() || at >= toks.len() {
            return Ok(at);
        }
        // Either `num <= x <= num` or `x <op> num` or `x free`.
        if let Some((lo, next)) = num_or_inf(toks, at) {
            let Some(Tok::Le) = toks.get(next) else {
                return Err(SolveError::Unparseable("bounds: expected <=".into()));
            };
            let Some(Tok::Word(name)) = toks.get(next + 1) else {
                return Err(SolveError::Unparseable("bounds: expected a name".into()));
            };
            let mut hi = f64::INFINITY;
            let mut here = next + 2;
            if let Some(Tok::Le) = toks.get(here) {
                let Some((v, nn)) = num_or_inf(toks, here + 1) else {
                    return Err(SolveError::Unparseable("bounds: expected a number".into()));
                };
                hi = v;
                here = nn;
            }
            let entry = lp.bounds.entry(name.clone()).or_insert((0.0, f64::INFINITY));
            *entry = (lo, hi);
            at = here;
            continue;
        }
        let Some(Tok::Word(name)) = toks.get(at) else {
            return Err(SolveError::Unparseable("bounds: expected a name".into()));
        };
        let name = name.clone();
        match toks.get(at + 1) {
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("free") => {
                lp.bounds
                    .insert(name, (f64::NEG_INFINITY, f64::INFINITY));
                at += 2;
            }
            Some(Tok::Le) => {
                let Some((v, next)) = num_or_inf(toks, at + 2) else {
                    return Err(SolveError::Unparseable("bounds: expected a number".into()));
                };
                let entry = lp.bounds.entry(name).or_insert((0.0, f64::INFINITY));
                entry.1 = v;
                at = next;
            }
            Some(Tok::Ge) => {
                let Some((v, next)) = num_or_inf(toks, at + 2) else {
                    return Err(SolveError::Unparseable("bounds: expected a number".into()));
                };
                let entry = lp.bounds.entry(name).or_insert((0.0, f64::INFINITY));
                entry.0 = v;
                at = next;
            }
            Some(Tok::Eq) => {
                let Some((v, next)) = num_or_inf(toks, at + 2) else {
                    return Err(SolveError::Unparseable("bounds: expected a number".into()));
                };
                lp.bounds.insert(name, (v, v));
                at = next;
            }
            other => {
                return Err(SolveError::Unparseable(format!(
                    "bounds: unexpected {other:?} after {name}"
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_single_row() {
        let text = "\
Minimize
 obj: 2 x + y
Subject To
 c1: x + y >= 2
Bounds
 0 <= y <= 10
Binaries
 x
End
";
        let lp = parse_lp(text).unwrap();
        assert!(lp.minimize);
        assert_eq!(lp.objective, vec![("x".into(), 2.0), ("y".into(), 1.0)]);
        assert_eq!(lp.rows.len(), 1);
        assert_eq!(lp.rows[0].terms, vec![("x".into(), 1.0), ("y".into(), 1.0)]);
        assert_eq!(lp.rows[0].sense, Sense::Ge);
        assert_eq!(lp.rows[0].rhs, 2.0);
        assert_eq!(lp.bounds_of("y"), (0.0, 10.0));
        assert!(lp.is_integer("x"));
        assert_eq!(lp.bounds_of("x"), (0.0, 1.0));
    }

    #[test]
    fn comments_and_wrapping_ignored() {
        let a = "Minimize\n obj: x\nSubject To\n c: x + 2 y <= 5\nEnd\n";
        let b = "\\ header\nMinimize\n obj:\n x\nSubject To\n\\ tag\n c: x\n + 2 y <= 5\nEnd\n";
        let pa = parse_lp(a).unwrap();
        let pb = parse_lp(b).unwrap();
        assert_eq!(pa.rows, pb.rows);
        assert_eq!(pa.objective, pb.objective);
    }

    #[test]
    fn negative_and_fixed_bounds() {
        let text = "Minimize\n obj: x\nSubject To\n c: - 2 x - y >= -4\nBounds\n x = 3\n -1 <= y <= 1\n z free\nEnd\n";
        let lp = parse_lp(text).unwrap();
        assert_eq!(lp.rows[0].terms, vec![("x".into(), -2.0), ("y".into(), -1.0)]);
        assert_eq!(lp.rows[0].rhs, -4.0);
        assert_eq!(lp.bounds_of("x"), (3.0, 3.0));
        assert_eq!(lp.bounds_of("y"), (-1.0, 1.0));
        assert_eq!(
            lp.bounds_of("z"),
            (f64::NEG_INFINITY, f64::INFINITY)
        );
    }
}
