//! Solver-agnostic solve path: serialize the model, hand it to an
//! embedded or external MILP solver, then re-certify the returned point
//! row by row before anyone downstream trusts it.

pub mod certify;
mod embedded;
mod external;
pub mod lp_format;
pub mod sol_format;

pub use external::solve_lp_file;

use thiserror::Error;

use crate::milp::MilpModel;

/// Environment variable selecting an external solver command template,
/// e.g. `mysolver {lp} {sol}`.
pub const SOLVER_CMD_ENV: &str = "GRIDMEND_SOLVER_CMD";
/// Environment variable overriding where solve workspaces are created.
pub const TMPDIR_ENV: &str = "GRIDMEND_TMPDIR";

#[derive(Debug, Clone, PartialEq)]
pub enum SolverSel {
    /// In-process HiGHS.
    Embedded,
    /// Command template with `{lp}` and `{sol}` placeholders; the
    /// command must read the LP file and write a solution file.
    External { command: String },
}

#[derive(Debug, Clone)]
pub struct SolveParams {
    pub rel_gap: f64,
    /// Seconds.
    pub time_limit: f64,
    pub threads: usize,
    pub solver: SolverSel,
}

impl Default for SolveParams {
    fn default() -> Self {
        let solver = match std::env::var(SOLVER_CMD_ENV) {
            Ok(cmd) if !cmd.trim().is_empty() => SolverSel::External { command: cmd },
            _ => SolverSel::Embedded,
        };
        SolveParams {
            rel_gap: 1e-4,
            time_limit: 600.0,
            threads: 1,
            solver,
        }
    }
}

impl SolveParams {
    pub fn exact() -> Self {
        SolveParams {
            rel_gap: 1e-7,
            ..Default::default()
        }
    }

    pub fn with_gap(rel_gap: f64) -> Self {
        SolveParams {
            rel_gap,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveStatus {
    /// Proven optimal within the requested relative gap.
    Optimal,
    /// Incumbent available, bound not closed.
    Feasible { gap: f64 },
    Infeasible,
    /// Stopped at the time limit with no incumbent.
    Timeout,
}

impl SolveStatus {
    pub fn has_solution(&self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    /// Dollars, recomputed from the certified point.
    pub objective: f64,
    /// Indexed by `VarId`.
    pub values: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("solver process failed: {0}")]
    Process(String),
    #[error("solver output not parseable: {0}")]
    Unparseable(String),
    #[error("solver exceeded its wall-clock budget and was killed")]
    Killed,
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("lp export failed: {0}")]
    Export(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Solve and certify. A returned feasible/optimal solution satisfied
/// every row of `model` under the independent re-check, with binaries
/// rounded clean.
pub fn solve(model: &MilpModel, params: &SolveParams) -> Result<Solution, SolveError> {
    let raw = match &params.solver {
        SolverSel::Embedded => embedded::solve(model, params)?,
        SolverSel::External { command } => external::solve(model, params, command)?,
    };
    match raw.status {
        SolveStatus::Infeasible | SolveStatus::Timeout => Ok(Solution {
            status: raw.status,
            objective: f64::NAN,
            values: Vec::new(),
        }),
        _ => {
            let mut values = raw.values;
            certify::certify(model, &mut values, raw.reported_objective)?;
            Ok(Solution {
                status: raw.status,
                objective: model.objective_at(&values),
                values,
            })
        }
    }
}

/// What a backend hands back before certification.
pub(crate) struct RawSolution {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    pub reported_objective: Option<f64>,
}

/// Deterministic LP-format serialization of the model; `annotate` adds
/// row tags as comments.
pub fn export_model(model: &MilpModel, annotate: bool) -> Result<String, SolveError> {
    lp_format::write_lp(model, annotate)
}
