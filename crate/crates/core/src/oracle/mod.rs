//! Independent verification of solver output: linear radial power-flow
//! replay, conservative envelope certification, radiality, and an
//! exhaustive optimizer for tiny instances. Nothing here goes through
//! the model builder; agreement between the two paths is the test.

mod bounds;
mod brute;
mod pf;
mod radiality;

pub use bounds::{
    check_conservative_bounds, monotone_envelope_check, plan_roots, step_configs,
    steps_are_nested, BoundReport, BoundViolation,
};
pub use brute::{brute_force_small, BruteResult};
pub use pf::{lindistflow_solve, PfResult};
pub use radiality::check_radiality;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("power flow replay: {0}")]
    Pf(String),
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),
    #[error("no feasible plan exists for this instance")]
    NoFeasiblePlan,
    #[error("{0}")]
    Internal(String),
}

/// One intermediate configuration during restoration: everything
/// energized at or before step `step`, under the final closed-line set.
#[derive(Debug, Clone)]
pub struct StepConfig {
    pub step: usize,
    pub energized_zones: Vec<bool>,
    pub closed_lines: Vec<bool>,
    pub demand_active: Vec<bool>,
    /// Root buses anchoring each island at the reference voltage.
    pub root_buses: Vec<crate::net::BusIdx>,
}
