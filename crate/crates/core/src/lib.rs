//! Post-event distribution feeder restoration: crew routing, damage
//! assessment via patrols, manual/remote switching, repair scheduling and
//! load re-energization, solved as a MILP and driven by a rolling-horizon
//! dispatch simulation with an independent linearized power-flow checker.

pub mod milp;
pub mod net;
pub mod oracle;
pub mod plan;
pub mod scenario;
pub mod schedule;
pub mod sim;
pub mod solver;
pub mod synth;
pub mod units;
