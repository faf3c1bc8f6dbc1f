//! In-process backend on top of HiGHS.

use highs::{HighsModelStatus, RowProblem, Sense as HSense};

use crate::milp::{MilpModel, Sense};
use crate::solver::lp_format::ParsedLp;
use crate::solver::{RawSolution, SolveError, SolveParams, SolveStatus};

fn configure(model: &mut highs::Model, params: &SolveParams) {
    model.set_option("output_flag", false);
    model.set_option("time_limit", params.time_limit);
    model.set_option("mip_rel_gap", params.rel_gap);
    model.set_option("threads", params.threads as i32);
    // Keep integrality crisp enough for the 1e-6 rounding contract.
    model.set_option("mip_feasibility_tolerance", 1e-9);
    model.set_option("primal_feasibility_tolerance", 1e-9);
}

fn map_status(status: HighsModelStatus) -> Result<SolveStatus, SolveError> {
    match status {
        HighsModelStatus::Optimal => Ok(SolveStatus::Optimal),
        HighsModelStatus::Infeasible => Ok(SolveStatus::Infeasible),
        HighsModelStatus::ReachedTimeLimit => Ok(SolveStatus::Timeout),
        other => Err(SolveError::Process(format!(
            "unexpected solver status {other:?}"
        ))),
    }
}

pub(crate) fn solve(model: &MilpModel, params: &SolveParams) -> Result<RawSolution, SolveError> {
    let mut pb = RowProblem::default();
    let mut cols = Vec::with_capacity(model.vars.len());
    let mut obj = vec![0.0; model.vars.len()];
    for (var, coef) in &model.objective {
        obj[var.0] += coef;
    }
    for (i, v) in model.vars.iter().enumerate() {
        let col = if v.integer {
            pb.add_integer_column(obj[i], v.lb..=v.ub)
        } else {
            pb.add_column(obj[i], v.lb..=v.ub)
        };
        cols.push(col);
    }
    for row in &model.rows {
        let terms: Vec<_> = row.terms.iter().map(|(v, c)| (cols[v.0], *c)).collect();
        match row.sense {
            Sense::Le => pb.add_row(..=row.rhs, terms),
            Sense::Ge => pb.add_row(row.rhs.., terms),
            Sense::Eq => pb.add_row(row.rhs..=row.rhs, terms),
        };
    }
    let mut m = pb.optimise(HSense::Minimise);
    configure(&mut m, params);
    let solved = m.solve();
    let status = map_status(solved.status())?;
    if !status.has_solution() {
        return Ok(RawSolution {
            status,
            values: Vec::new(),
            reported_objective: None,
        });
    }
    let sol = solved.get_solution();
    Ok(RawSolution {
        status,
        values: sol.columns().to_vec(),
        reported_objective: None,
    })
}

/// Solve a parsed LP-format problem directly; backs the bundled
/// file-to-file solving path.
pub(crate) fn solve_parsed(
    lp: &ParsedLp,
    params: &SolveParams,
) -> Result<(SolveStatus, Option<f64>, Vec<(String, f64)>), SolveError> {
    let names = lp.variables();
    let sign = if lp.minimize { 1.0 } else { -1.0 };
    let mut obj = vec![0.0; names.len()];
    let index: std::collections::HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    for (n, c) in &lp.objective {
        obj[index[n.as_str()]] += sign * c;
    }
    let mut pb = RowProblem::default();
    let mut cols = Vec::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        let (lb, ub) = lp.bounds_of(name);
        let col = if lp.is_integer(name) {
            pb.add_integer_column(obj[i], lb..=ub)
        } else {
            pb.add_column(obj[i], lb..=ub)
        };
        cols.push(col);
    }
    for row in &lp.rows {
        let terms: Vec<_> = row
            .terms
            .iter()
            .map(|(n, c)| (cols[index[n.as_str()]], *c))
            .collect();
        match row.sense {
            Sense::Le => pb.add_row(..=row.rhs, terms),
            Sense::Ge => pb.add_row(row.rhs.., terms),
            Sense::Eq => pb.add_row(row.rhs..=row.rhs, terms),
        };
    }
    let mut m = pb.optimise(HSense::Minimise);
    configure(&mut m, params);
    let solved = m.solve();
    let status = map_status(solved.status())?;
    if !status.has_solution() {
        return Ok((status, None, Vec::new()));
    }
    let values = solved.get_solution().columns().to_vec();
    let objective: f64 = names
        .iter()
        .enumerate()
        .map(|(i, _)| obj[i] * values[i])
        .sum::<f64>()
        * sign;
    Ok((
        status,
        Some(objective),
        names.into_iter().zip(values).collect(),
    ))
}
