//! Independent feasibility re-check of solver output. Nothing a solver
//! returns is trusted until every row evaluates clean here, with
//! binaries rounded to exact integers first.

use crate::milp::{MilpModel, Sense};
use crate::solver::SolveError;
use crate::units::CERT_TOL;

/// Binary values further than this from an integer are rejected.
pub const ROUNDING_TOL: f64 = 1e-6;

/// Round integers, snap bound violations within tolerance, then verify
/// every row. `reported` is the solver's claimed objective (without our
/// offset), checked for consistency when present.
pub fn certify(
    model: &MilpModel,
    values: &mut [f64],
    reported: Option<f64>,
) -> Result<(), SolveError> {
    if values.len() != model.vars.len() {
        return Err(SolveError::Certification(format!(
            "solution has {} values for {} variables",
            values.len(),
            model.vars.len()
        )));
    }
    for (i, def) in model.vars.iter().enumerate() {
        let v = values[i];
        if !v.is_finite() {
            return Err(SolveError::Certification(format!(
                "{}: non-finite value {v}",
                def.name
            )));
        }
        if def.integer {
            let r = v.round();
            if (v - r).abs() > ROUNDING_TOL {
                return Err(SolveError::Certification(format!(
                    "{}: fractional integer value {v}",
                    def.name
                )));
            }
            values[i] = r;
        }
        if values[i] < def.lb - CERT_TOL || values[i] > def.ub + CERT_TOL {
            return Err(SolveError::Certification(format!(
                "{}: value {} outside [{}, {}]",
                def.name, values[i], def.lb, def.ub
            )));
        }
        values[i] = values[i].clamp(def.lb, def.ub);
    }

    for row in &model.rows {
        let lhs: f64 = row.terms.iter().map(|(v, c)| c * values[v.0]).sum();
        let scale = row
            .terms
            .iter()
            .map(|(_, c)| c.abs())
            .fold(1.0f64, f64::max);
        let tol = CERT_TOL * scale;
        let violation = match row.sense {
            Sense::Le => lhs - row.rhs,
            Sense::Ge => row.rhs - lhs,
            Sense::Eq => (lhs - row.rhs).abs(),
        };
        if violation > tol {
            return Err(SolveError::Certification(format!(
                "row {} violated by {violation:.3e} (tol {tol:.1e})",
                row.name
            )));
        }
    }

    if let Some(reported) = reported {
        if reported.is_finite() {
            let computed = model.objective_at(values) - model.objective_offset;
            let tol = 1e-6 * computed.abs().max(1.0);
            if (computed - reported).abs() > tol {
                return Err(SolveError::Certification(format!(
                    "objective mismatch: solver reported {reported}, recomputed {computed}"
                )));
            }
        }
    }
    Ok(())
}

/// Row-by-row satisfaction check without mutation; used by tests and the
/// validation tooling.
pub fn max_violation(model: &MilpModel, values: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for row in &model.rows {
        let lhs: f64 = row.terms.iter().map(|(v, c)| c * values[v.0]).sum();
        let violation = match row.sense {
            Sense::Le => lhs - row.rhs,
            Sense::Ge => row.rhs - lhs,
            Sense::Eq => (lhs - row.rhs).abs(),
        };
        worst = worst.max(violation);
    }
    worst
}
