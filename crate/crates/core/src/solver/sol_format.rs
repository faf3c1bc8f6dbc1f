//! Parsers for the solution files common open MILP solvers write.
//!
//! Three dialects are recognized:
//!   - HiGHS `--solution_file` output: a `Model status:`/`Model status`
//!     header, `Objective` line and a `# Columns n` block of
//!     `name value` pairs.
//!   - CBC `solve ... solution <file>` output: a first line like
//!     `Optimal - objective value 12.3` followed by
//!     `idx name value reducedCost` rows.
//!   - Generic `name value` pairs with optional `status`/`objective`
//!     header lines and `#`/`\` comments.

use std::collections::HashMap;

use crate::solver::{SolveError, SolveStatus};

#[derive(Debug, Clone)]
pub struct ParsedSolution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub values: HashMap<String, f64>,
}

pub fn parse_solution(text: &str) -> Result<ParsedSolution, SolveError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with("Model status") {
        return parse_highs(text);
    }
    let first = trimmed.lines().next().unwrap_or("");
    if first.contains("objective value")
        || first.starts_with("Optimal")
        || first.starts_with("Infeasible")
        || first.starts_with("Unbounded")
        || first.starts_with("Stopped")
    {
        return parse_cbc(text);
    }
    parse_generic(text)
}

fn parse_highs(text: &str) -> Result<ParsedSolution, SolveError> {
    let mut status = None;
    let mut objective = None;
    let mut values = HashMap::new();
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.next() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("Model status") {
            let word = rest.trim_start_matches(':').trim();
            let word = if word.is_empty() {
                lines.next().unwrap_or("").trim()
            } else {
                word
            };
            status = Some(match word {
                "Optimal" => SolveStatus::Optimal,
                "Infeasible" => SolveStatus::Infeasible,
                "Time limit reached" => SolveStatus::Timeout,
                other => {
                    return Err(SolveError::Unparseable(format!(
                        "unknown model status {other:?}"
                    )))
                }
            });
        } else if let Some(rest) = line.strip_prefix("Objective") {
            objective = rest.trim().parse::<f64>().ok();
        } else if let Some(rest) = line.strip_prefix("# Columns") {
            let n: usize = rest.trim().parse().map_err(|_| {
                SolveError::Unparseable("bad column count in solution".into())
            })?;
            for _ in 0..n {
                let row = lines
                    .next()
                    .ok_or_else(|| SolveError::Unparseable("truncated column block".into()))?;
                let mut it = row.split_whitespace();
                let (Some(name), Some(value)) = (it.next(), it.next()) else {
                    return Err(SolveError::Unparseable(format!("bad column row {row:?}")));
                };
                let v: f64 = value.parse().map_err(|_| {
                    SolveError::Unparseable(format!("bad value in column row {row:?}"))
                })?;
                values.insert(name.to_string(), v);
            }
            break; // rows / duals follow; not needed
        }
    }
    Ok(ParsedSolution {
        status: status
            .ok_or_else(|| SolveError::Unparseable("missing model status".into()))?,
        objective,
        values,
    })
}

fn parse_cbc(text: &str) -> Result<ParsedSolution, SolveError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let status = if header.starts_with("Optimal") {
        SolveStatus::Optimal
    } else if header.starts_with("Infeasible") {
        SolveStatus::Infeasible
    } else if header.starts_with("Stopped on time") {
        SolveStatus::Timeout
    } else if header.contains("objective value") {
        SolveStatus::Feasible { gap: f64::NAN }
    } else {
        return Err(SolveError::Unparseable(format!(
            "unrecognized solution header {header:?}"
        )));
    };
    let objective = header
        .split("objective value")
        .nth(1)
        .and_then(|s| s.trim().split_whitespace().next())
        .and_then(|s| s.parse::<f64>().ok());
    let mut values = HashMap::new();
    for line in lines {
        let mut it = line.split_whitespace();
        let Some(first) = it.next() else { continue };
        // `idx name value [reduced]`; a leading `**` marks infeasibilities.
        let (name, value) = if first == "**" {
            (it.next(), it.next().and_then(|_| it.next()))
        } else if first.parse::<usize>().is_ok() {
            (it.next(), it.next())
        } else {
            (Some(first), it.next())
        };
        if let (Some(name), Some(value)) = (name, value) {
            if let Ok(v) = value.parse::<f64>() {
                values.insert(name.to_string(), v);
            }
        }
    }
    Ok(ParsedSolution {
        status,
        objective,
        values,
    })
}

fn parse_generic(text: &str) -> Result<ParsedSolution, SolveError> {
    let mut status = SolveStatus::Feasible { gap: f64::NAN };
    let mut objective = None;
    let mut values = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('\\') {
            continue;
        }
        let mut it = line.split_whitespace();
        let key = it.next().unwrap();
        if key.eq_ignore_ascii_case("status") {
            let word = it.next().unwrap_or("");
            status = match word.to_ascii_lowercase().as_str() {
                "optimal" => SolveStatus::Optimal,
                "infeasible" => SolveStatus::Infeasible,
                "timeout" | "timelimit" => SolveStatus::Timeout,
                _ => SolveStatus::Feasible { gap: f64::NAN },
            };
            continue;
        }
        if key.eq_ignore_ascii_case("objective") {
            objective = it.next().and_then(|s| s.parse().ok());
            continue;
        }
        let Some(value) = it.next() else {
            return Err(SolveError::Unparseable(format!(
                "expected `name value`, found {line:?}"
            )));
        };
        let v: f64 = value
            .parse()
            .map_err(|_| SolveError::Unparseable(format!("bad value in {line:?}")))?;
        values.insert(key.to_string(), v);
    }
    if values.is_empty() && objective.is_none() {
        return Err(SolveError::Unparseable("empty solution file".into()));
    }
    Ok(ParsedSolution {
        status,
        objective,
        values,
    })
}

/// Write the HiGHS-style dialect; the bundled LP solving subcommand uses
/// it so external-command runs exercise the same parser as real solvers.
pub fn write_solution(
    status: SolveStatus,
    objective: Option<f64>,
    values: &[(String, f64)],
) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let word = match status {
        SolveStatus::Optimal => "Optimal",
        SolveStatus::Infeasible => "Infeasible",
        SolveStatus::Timeout => "Time limit reached",
        SolveStatus::Feasible { .. } => "Optimal",
    };
    let _ = writeln!(out, "Model status: {word}");
    if let Some(obj) = objective {
        let _ = writeln!(out, "Objective {obj}");
    }
    let _ = writeln!(out, "# Columns {}", values.len());
    for (name, v) in values {
        let _ = writeln!(out, "{name} {v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn highs_dialect() {
        let text = "Model status: Optimal\nObjective 12.5\n# Columns 2\nx 1\ny 0.5\n# Rows 1\nc1 2\n";
        let sol = parse_solution(text).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, Some(12.5));
        assert_eq!(sol.values["x"], 1.0);
        assert_eq!(sol.values["y"], 0.5);
        assert!(!sol.values.contains_key("c1"));
    }

    #[test]
    fn cbc_dialect() {
        let text = "Optimal - objective value 7\n 0 x 1 0\n 1 y 2.5 0\n";
        let sol = parse_solution(text).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, Some(7.0));
        assert_eq!(sol.values["y"], 2.5);

        let inf = parse_solution("Infeasible - objective value 0\n").unwrap();
        assert_eq!(inf.status, SolveStatus::Infeasible);
    }

    #[test]
    fn generic_dialect() {
        let text = "# comment\nstatus optimal\nobjective 3\nx 1\ny 2\n";
        let sol = parse_solution(text).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.values["y"], 2.0);
    }

    #[test]
    fn roundtrip_through_writer() {
        let out = write_solution(
            SolveStatus::Optimal,
            Some(4.25),
            &[("a".into(), 1.0), ("b".into(), 0.0)],
        );
        let sol = parse_solution(&out).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.objective, Some(4.25));
        assert_eq!(sol.values["a"], 1.0);
    }
}
