//! Discrete-event replay of a set of discrete decisions: given the
//! chosen arcs, visits, switch operations and supply tree, compute the
//! earliest consistent completion times and zone outage times as the
//! least fixed point of the timing rules. The solver minimizes positive
//! multiples of the outage times, so its optimum matches this replay;
//! the comparison is a correctness check on both sides.

use thiserror::Error;

use crate::net::Network;
use crate::scenario::{OptimizationInput, PointKind, RootSource};

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("arcs do not decompose into origin-rooted simple paths: {0}")]
    BadPaths(String),
    #[error("timing rules diverge: {0}")]
    Diverges(String),
    #[error("{0}")]
    BadDecisions(String),
}

/// Which source keeps a zone energized in the final configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Supply {
    Root(RootSource),
    Parent(usize),
}

/// Discrete choices, either read off a certified solution or enumerated
/// by the exhaustive oracle.
#[derive(Debug, Clone)]
pub struct Decisions {
    /// Traversed arcs between point indices.
    pub arcs: Vec<(usize, usize)>,
    /// Serviced points (crew origins count as visited).
    pub visited: Vec<bool>,
    /// During-patrol opening per MS entry.
    pub patrol_open: Vec<bool>,
    /// Final closed state per RCS entry.
    pub rcs_closed: Vec<bool>,
    /// Supply choice per zone.
    pub supply: Vec<Supply>,
}

impl Decisions {
    /// Final closed state of an MS entry, from its operation pattern.
    pub fn ms_final_closed(&self, input: &OptimizationInput, entry: usize) -> bool {
        let e = &input.ms_entries[entry];
        let first = e
            .first_point
            .map(|p| self.visited[p])
            .unwrap_or(false)
            || self.patrol_open[entry];
        let second = e.second_point.map(|p| self.visited[p]).unwrap_or(false);
        if e.closed_now {
            // open (first op) then possibly re-close (second op)
            !first || second
        } else {
            first
        }
    }
}

#[derive(Debug, Clone)]
pub struct Schedule {
    /// Completion time per point; never-performed operations sit at the
    /// out-of-scope marker.
    pub finish: Vec<f64>,
    /// Outage end per zone.
    pub outage: Vec<f64>,
    /// Origin-rooted point paths, one per crew, origins included.
    pub paths: Vec<Vec<usize>>,
}

/// Decompose the arc set into one simple path per crew origin.
pub fn crew_paths(
    input: &OptimizationInput,
    decisions: &Decisions,
) -> Result<Vec<Vec<usize>>, ReplayError> {
    let np = input.points.len();
    let mut next = vec![None; np];
    let mut indeg = vec![0usize; np];
    for &(a, b) in &decisions.arcs {
        if a >= np || b >= np {
            return Err(ReplayError::BadDecisions("arc out of range".into()));
        }
        if next[a].replace(b).is_some() {
            return Err(ReplayError::BadPaths(format!(
                "point {} has two outgoing arcs",
                input.points[a].name
            )));
        }
        indeg[b] += 1;
        if indeg[b] > 1 {
            return Err(ReplayError::BadPaths(format!(
                "point {} has two incoming arcs",
                input.points[b].name
            )));
        }
    }
    let mut used = vec![false; np];
    let mut paths = Vec::new();
    for &origin in &input.crew_origins {
        let mut path = vec![origin];
        used[origin] = true;
        let mut at = origin;
        while let Some(to) = next[at] {
            if used[to] {
                return Err(ReplayError::BadPaths(format!(
                    "point {} reached twice",
                    input.points[to].name
                )));
            }
            used[to] = true;
            path.push(to);
            at = to;
        }
        paths.push(path);
    }
    // Every visited non-origin point must lie on some crew's path, and
    // unvisited points must not appear in any arc.
    for p in 0..np {
        let visited = decisions.visited[p];
        if visited && !used[p] {
            return Err(ReplayError::BadPaths(format!(
                "visited point {} is not reachable from any crew",
                input.points[p].name
            )));
        }
        if !visited && (next[p].is_some() || indeg[p] > 0) {
            return Err(ReplayError::BadPaths(format!(
                "unvisited point {} appears in an arc",
                input.points[p].name
            )));
        }
    }
    Ok(paths)
}

/// The timing semantics, iterated to their least fixed point. All rules
/// only raise times; divergence means the decisions demand an impossible
/// ordering (for example closing a tie before a repair the same crew
/// performs later).
pub fn replay(
    net: &Network,
    input: &OptimizationInput,
    decisions: &Decisions,
) -> Result<Schedule, ReplayError> {
    let np = input.points.len();
    let nz = input.zones.len();
    if decisions.visited.len() != np
        || decisions.patrol_open.len() != input.ms_entries.len()
        || decisions.rcs_closed.len() != input.rcs_entries.len()
        || decisions.supply.len() != nz
    {
        return Err(ReplayError::BadDecisions("shape mismatch".into()));
    }
    let paths = crew_paths(input, decisions)?;
    let bt = 2.0 * input.horizon;

    // First/second operation performed flags per MS entry.
    let first_done: Vec<bool> = input
        .ms_entries
        .iter()
        .enumerate()
        .map(|(e, entry)| {
            entry
                .first_point
                .map(|p| decisions.visited[p])
                .unwrap_or(false)
                || decisions.patrol_open[e]
        })
        .collect();
    let second_done: Vec<bool> = input
        .ms_entries
        .iter()
        .map(|entry| {
            entry
                .second_point
                .map(|p| decisions.visited[p])
                .unwrap_or(false)
        })
        .collect();

    let mut finish = vec![0.0f64; np];
    for p in 0..np {
        finish[p] = match &input.points[p].kind {
            PointKind::CrewOrigin { available, .. } => *available,
            PointKind::MsFirst { ms, .. } => {
                let e = input.ms_entries.iter().position(|x| x.ms == *ms).unwrap();
                if decisions.visited[p] || decisions.patrol_open[e] {
                    0.0
                } else {
                    bt
                }
            }
            PointKind::MsSecond { .. } => {
                if decisions.visited[p] {
                    0.0
                } else {
                    bt
                }
            }
            PointKind::FaultTask { .. } => 0.0,
        };
    }
    let mut outage = vec![0.0f64; nz];
    for (z, zi) in input.zones.iter().enumerate() {
        outage[z] = match zi.energized_at {
            Some(t) => t,
            None => zi.not_before,
        };
    }
    let pinned: Vec<bool> = input
        .zones
        .iter()
        .map(|z| z.energized_at.is_some())
        .collect();

    fn raise(slot: &mut f64, v: f64, changed: &mut bool) {
        if v > *slot + 1e-12 {
            *slot = v;
            *changed = true;
        }
    }

    let limit = 4.0 * bt + 1.0;
    let max_sweeps = 2 * (np + nz) + 8;
    for sweep in 0..=max_sweeps {
        let mut changed = false;

        // Chained completions along each crew path.
        for path in &paths {
            for w in path.windows(2) {
                let (a, b) = (w[0], w[1]);
                let op = match &input.points[b].kind {
                    PointKind::CrewOrigin { .. } => 0.0,
                    PointKind::FaultTask { op_time, .. } => *op_time,
                    PointKind::MsFirst { op_time, .. } | PointKind::MsSecond { op_time, .. } => {
                        *op_time
                    }
                };
                let v = finish[a] + input.travel[a][b] + op;
                raise(&mut finish[b], v, &mut changed);
            }
        }

        for (e, entry) in input.ms_entries.iter().enumerate() {
            // During-patrol opening completes with the patrol.
            if decisions.patrol_open[e] {
                let task = entry.patrol_open_task.expect("patrol-open has a task");
                let p1 = entry.first_point.expect("patrol-open has a first point");
                let v = finish[task];
                raise(&mut finish[p1], v, &mut changed);
            }
            // Second operation after the first.
            if let (Some(p1), Some(p2)) = (entry.first_point, entry.second_point) {
                let v = finish[p1];
                raise(&mut finish[p2], v, &mut changed);
            }
        }

        // Parent energized before child.
        for z in 0..nz {
            if pinned[z] {
                continue;
            }
            if let Supply::Parent(parent) = decisions.supply[z] {
                let v = outage[parent];
                raise(&mut outage[z], v, &mut changed);
            }
        }
        // Faults hold their zones out.
        for &p in &input.fault_tasks {
            if let PointKind::FaultTask { zones, .. } = &input.points[p].kind {
                for bz in zones {
                    if !pinned[bz.idx()] {
                        let v = finish[p];
                        raise(&mut outage[bz.idx()], v, &mut changed);
                    }
                }
            }
        }
        for (e, entry) in input.ms_entries.iter().enumerate() {
            let (za, zb) = net.switch_zones(entry.ms);
            let (za, zb) = (za.idx(), zb.idx());
            if entry.closed_now {
                if first_done[e] {
                    // Opening gates both sides.
                    let p1 = entry.first_point.expect("first op performed");
                    for z in [za, zb] {
                        if !pinned[z] {
                            let v = finish[p1];
                            raise(&mut outage[z], v, &mut changed);
                        }
                    }
                } else {
                    // Untouched closed switch: the pair stays connected,
                    // so the parent side cannot lead the child side.
                    for (parent, child) in [(za, zb), (zb, za)] {
                        if decisions.supply[child] == Supply::Parent(parent) && !pinned[parent] {
                            let v = outage[child];
                            raise(&mut outage[parent], v, &mut changed);
                        }
                    }
                }
                if second_done[e] {
                    let p2 = entry.second_point.expect("second op performed");
                    for (parent, child) in [(za, zb), (zb, za)] {
                        if decisions.supply[child] == Supply::Parent(parent) && !pinned[child] {
                            let v = finish[p2];
                            raise(&mut outage[child], v, &mut changed);
                        }
                    }
                }
            } else if first_done[e] {
                // Closing a normally-open switch energizes the child then.
                let p1 = entry.first_point.expect("first op performed");
                for (parent, child) in [(za, zb), (zb, za)] {
                    if decisions.supply[child] == Supply::Parent(parent) && !pinned[child] {
                        let v = finish[p1];
                        raise(&mut outage[child], v, &mut changed);
                    }
                }
            }
            // The closing operation waits for the child it will supply.
            let close_point = if entry.closed_now {
                entry.second_point.filter(|_| second_done[e])
            } else {
                entry.first_point.filter(|_| first_done[e])
            };
            if let Some(pc) = close_point {
                for (parent, child) in [(za, zb), (zb, za)] {
                    if decisions.supply[child] == Supply::Parent(parent) {
                        let v = outage[child];
                        raise(&mut finish[pc], v, &mut changed);
                    }
                }
            }
        }

        if !changed {
            break;
        }
        if sweep == max_sweeps || finish.iter().chain(outage.iter()).any(|v| *v > limit) {
            return Err(ReplayError::Diverges(
                "completion times keep increasing; the ordering is impossible".into(),
            ));
        }
    }

    Ok(Schedule {
        finish,
        outage,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{snapshot_for_optimization, PointKind, ScenarioState};
    use crate::synth;

    /// Single crew, one revealed fault: travel then repair, zone out
    /// until the repair ends.
    #[test]
    fn chain_arithmetic() {
        let net = synth::single_zone_net();
        let truth = synth::seeded_scenario(&net, 1, 1);
        let mut state = ScenarioState::post_event(&net, &truth);
        state
            .reveal_zone(&net, crate::net::PatrolZoneIdx(0), &truth)
            .unwrap();
        let input = snapshot_for_optimization(&state, &net, 1440.0);
        assert_eq!(input.fault_tasks.len(), 1);
        let f = input.fault_tasks[0];
        let origin = input.crew_origins[0];

        let decisions = Decisions {
            arcs: vec![(origin, f)],
            visited: vec![true; input.points.len()],
            patrol_open: vec![],
            rcs_closed: vec![],
            supply: vec![Supply::Root(RootSource::Substation)],
        };
        let sched = replay(&net, &input, &decisions).unwrap();
        let op = match &input.points[f].kind {
            PointKind::FaultTask { op_time, .. } => *op_time,
            _ => unreachable!(),
        };
        let expected = input.travel[origin][f] + op;
        assert!((sched.finish[f] - expected).abs() < 1e-9);
        assert!((sched.outage[0] - expected).abs() < 1e-9);
        assert_eq!(sched.paths, vec![vec![origin, f]]);
    }

    #[test]
    fn bad_arc_structures_are_rejected() {
        let net = synth::single_zone_net();
        let truth = synth::seeded_scenario(&net, 1, 1);
        let mut state = ScenarioState::post_event(&net, &truth);
        state
            .reveal_zone(&net, crate::net::PatrolZoneIdx(0), &truth)
            .unwrap();
        let input = snapshot_for_optimization(&state, &net, 1440.0);
        let f = input.fault_tasks[0];

        // A self-standing cycle disconnected from the origin.
        let decisions = Decisions {
            arcs: vec![(f, f)],
            visited: vec![true; input.points.len()],
            patrol_open: vec![],
            rcs_closed: vec![],
            supply: vec![Supply::Root(RootSource::Substation)],
        };
        assert!(matches!(
            crew_paths(&input, &decisions),
            Err(ReplayError::BadPaths(_))
        ));

        // Fault visited but not on any path.
        let decisions = Decisions {
            arcs: vec![],
            visited: vec![true; input.points.len()],
            patrol_open: vec![],
            rcs_closed: vec![],
            supply: vec![Supply::Root(RootSource::Substation)],
        };
        assert!(matches!(
            crew_paths(&input, &decisions),
            Err(ReplayError::BadPaths(_))
        ));
    }
}
