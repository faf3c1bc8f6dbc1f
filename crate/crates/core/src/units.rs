//! Unit conventions and the conversion constants shared by every module.
//!
//! All times are minutes, powers are kW / kvar, impedances are per-unit on
//! the network's declared kVA base, and voltages are carried as squared
//! per-unit magnitudes. Money is dollars.

/// Minutes per hour, for $/hour travel rates applied to minute durations.
pub const MIN_PER_HOUR: f64 = 60.0;

/// Energy not supplied for a load of `kw` interrupted for `minutes`.
pub fn kwh(kw: f64, minutes: f64) -> f64 {
    kw * minutes / MIN_PER_HOUR
}

/// Outage cost in dollars for `kw` load out for `minutes` at `rate` $/kWh.
pub fn outage_cost(kw: f64, minutes: f64, rate: f64) -> f64 {
    kwh(kw, minutes) * rate
}

/// Travel cost in dollars for `minutes` of driving at `rate` $/hour.
pub fn travel_cost(minutes: f64, rate: f64) -> f64 {
    minutes / MIN_PER_HOUR * rate
}

/// Squared per-unit voltage from a magnitude bound given in per-unit.
pub fn squared_pu(v_mag: f64) -> f64 {
    v_mag * v_mag
}

/// kW or kvar to per-unit on the declared base.
pub fn to_pu(kw: f64, base_kva: f64) -> f64 {
    kw / base_kva
}

/// Absolute feasibility tolerance used when re-certifying solver output.
pub const CERT_TOL: f64 = 1e-6;

/// Tolerance (minutes) for replay fidelity of action and outage times.
pub const REPLAY_TOL: f64 = 1e-6;

/// Per-unit tolerance for the conservative voltage/flow envelope checks.
pub const SANDWICH_TOL: f64 = 1e-6;

/// Nodal balance residual allowed in the linear power-flow replay.
pub const BALANCE_TOL: f64 = 1e-9;

/// Step-over-step monotonicity tolerance for replayed voltage profiles.
pub const MONOTONE_TOL: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert_eq!(kwh(100.0, 120.0), 200.0);
        assert_eq!(outage_cost(100.0, 120.0, 20.0), 4000.0);
        // 30 minutes at $0.60/hour of driving time.
        assert!((travel_cost(30.0, 0.6) - 0.30).abs() < 1e-12);
        assert_eq!(squared_pu(1.0), 1.0);
        assert!((squared_pu(0.95) - 0.9025).abs() < 1e-15);
    }
}
