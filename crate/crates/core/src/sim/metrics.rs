//! Timeline post-processing: energy not supplied, outage and travel
//! cost, and the restored-load / cumulative-cost curves.

use serde::Serialize;

use crate::net::Network;
use crate::sim::{EventKind, Timeline};
use crate::units::{travel_cost, MIN_PER_HOUR};

#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub ens_kwh: f64,
    pub outage_cost_usd: f64,
    pub travel_cost_usd: f64,
    pub total_cost_usd: f64,
    pub completion_min: Option<f64>,
    pub reopt_steps: usize,
    pub completed: bool,
    /// (minutes, restored kW) breakpoints, stepwise.
    pub restored_curve: Vec<(f64, f64)>,
    /// (minutes, cumulative outage cost in dollars) breakpoints.
    pub cumulative_cost_curve: Vec<(f64, f64)>,
}

pub fn compute_metrics(timeline: &Timeline, net: &Network) -> Metrics {
    let mut ens_kwh = 0.0;
    let mut outage_cost = 0.0;
    for (z, zone) in net.zones.iter().enumerate() {
        let t = timeline.energized_min[z];
        if t.is_nan() {
            continue;
        }
        ens_kwh += zone.load_p * t / MIN_PER_HOUR;
        outage_cost += zone.load_p * t / MIN_PER_HOUR * zone.outage_cost_rate;
    }
    let travel_cost_usd = travel_cost(timeline.travel_minutes, net.travel_cost_rate);

    // Restored-load step curve from energization events.
    let mut restored_curve = vec![(0.0, 0.0)];
    let mut restored = 0.0;
    for e in &timeline.events {
        if let EventKind::ZoneEnergized { zone } = &e.kind {
            let z = net.zone(zone).expect("known zone");
            restored += net.zones[z.idx()].load_p;
            restored_curve.push((e.time, restored));
        }
    }

    // Cumulative outage cost: integrate the unserved cost rate between
    // energizations.
    let full_rate: f64 = net
        .zones
        .iter()
        .map(|z| z.load_p * z.outage_cost_rate / MIN_PER_HOUR)
        .sum();
    let mut cumulative_cost_curve = vec![(0.0, 0.0)];
    let mut rate = full_rate;
    let mut acc = 0.0;
    let mut last_t = 0.0;
    for e in &timeline.events {
        if let EventKind::ZoneEnergized { zone } = &e.kind {
            let z = net.zone(zone).expect("known zone");
            acc += rate * (e.time - last_t);
            last_t = e.time;
            rate -= net.zones[z.idx()].load_p * net.zones[z.idx()].outage_cost_rate
                / MIN_PER_HOUR;
            cumulative_cost_curve.push((e.time, acc));
        }
    }

    Metrics {
        ens_kwh,
        outage_cost_usd: outage_cost,
        travel_cost_usd,
        total_cost_usd: outage_cost + travel_cost_usd,
        completion_min: timeline.completion_min,
        reopt_steps: timeline.reopt_times.len(),
        completed: timeline.completed,
        restored_curve,
        cumulative_cost_curve,
    }
}
