//! Rolling-horizon dispatch simulation: crews execute the committed plan
//! against the ground truth while the monitoring loop re-optimizes on
//! discoveries (held back by the minimum update time) and proactively
//! after the maximum update interval.

mod engine;
mod metrics;

pub use engine::{run_baseline_fptr, run_baseline_sprc, run_simulation};
pub use metrics::{compute_metrics, Metrics};

use serde::Serialize;
use thiserror::Error;

use crate::milp::{BuildError, PfMode};
use crate::net::CrewIdx;
use crate::plan::{ExtractError, RestorationPlan};
use crate::schedule::ReplayError;
use crate::solver::{SolveError, SolveParams};

#[derive(Debug, Clone)]
pub enum Baseline {
    None,
    /// Patrol everything first (makespan-optimal), then run the method
    /// with full information.
    Fptr,
    /// Dedicated patrol crews; the rest only repair and switch.
    Sprc { patrol_crews: Vec<CrewIdx> },
}

#[derive(Debug, Clone)]
pub struct PolicyConfig {
    /// Responsive re-optimizations wait at least this long after the
    /// previous one, minutes.
    pub min_update: f64,
    /// A re-optimization happens at least this often, minutes.
    pub max_update: f64,
    pub pf_mode: PfMode,
    pub baseline: Baseline,
    /// Planning horizon, minutes.
    pub horizon: f64,
    pub solve: SolveParams,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            min_update: 10.0,
            max_update: 30.0,
            pf_mode: PfMode::TimeStepFree,
            baseline: Baseline::None,
            horizon: 1440.0,
            solve: SolveParams::default(),
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0 < self.min_update
            && self.min_update <= self.max_update
            && self.max_update <= self.horizon)
        {
            return Err(SimError::Config(
                "need 0 < min_update <= max_update <= horizon".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub enum EventKind {
    TravelStart { crew: String, to_loc: String },
    TravelEnd { crew: String, loc: String },
    PatrolDone { crew: String, patrol_zone: String },
    FaultRevealed { fault: String, zone: String, repair_min: f64 },
    RepairStart { crew: String, fault: String },
    RepairDone { crew: String, fault: String },
    SwitchOp { crew: Option<String>, switch: String, closed: bool },
    ZoneEnergized { zone: String },
    Reoptimized {
        step: usize,
        reason: String,
        n_vars: usize,
        n_rows: usize,
        n_integers: usize,
        n_crews: usize,
        n_unpatrolled: usize,
        n_faults: usize,
        n_ms_points: usize,
        solve_ms: u128,
        objective: f64,
    },
    Aborted { reason: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone)]
pub struct Timeline {
    pub events: Vec<Event>,
    pub completed: bool,
    /// Clock when the last zone came back.
    pub completion_min: Option<f64>,
    /// Actual energization time per zone; NaN when never energized.
    pub energized_min: Vec<f64>,
    /// Clock of every re-optimization.
    pub reopt_times: Vec<f64>,
    /// Every committed plan, in order.
    pub plans: Vec<RestorationPlan>,
    /// Energization times promised by the last committed plan.
    pub final_plan_energization: Vec<f64>,
    /// Minutes of crew driving actually performed.
    pub travel_minutes: f64,
}

impl Timeline {
    pub fn push(&mut self, time: f64, kind: EventKind) {
        debug_assert!(
            self.events.last().map(|e| e.time <= time + 1e-9).unwrap_or(true),
            "events must be time-ordered"
        );
        self.events.push(Event { time, kind });
    }

    /// Trigger discipline: consecutive re-optimizations at least
    /// min_update and at most max_update apart, except the last.
    pub fn trigger_discipline_ok(&self, policy: &PolicyConfig) -> bool {
        let n = self.reopt_times.len();
        for w in self.reopt_times.windows(2).enumerate() {
            let (i, pair) = w;
            let gap = pair[1] - pair[0];
            let last = i + 2 == n;
            if gap < policy.min_update - 1e-9 {
                return false;
            }
            if !last && gap > policy.max_update + 1e-9 {
                return false;
            }
            if last && gap > policy.max_update + 1e-9 {
                // The terminal step may run late only if the run ended.
                continue;
            }
        }
        true
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("model build failed: {0}")]
    Build(#[from] BuildError),
    #[error("solver: {0}")]
    Solve(#[from] SolveError),
    #[error("plan extraction: {0}")]
    Extract(#[from] ExtractError),
    #[error("plan replay: {0}")]
    Replay(#[from] ReplayError),
    #[error("model infeasible at minute {at}")]
    Infeasible { at: f64 },
    #[error("solver hit its limit at minute {at} with no usable plan")]
    SolverTimeout { at: f64 },
    #[error("simulation aborted: {0}")]
    Abort(String),
}
