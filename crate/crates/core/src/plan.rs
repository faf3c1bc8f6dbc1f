//! Turn a certified solution into an executable restoration plan:
//! origin-rooted crew itineraries with canonical times, final switch
//! states, the supply tree and zone energization times.

use serde::Serialize;
use thiserror::Error;

use crate::milp::{LineStatusTerm, MilpModel, PfVars};
use crate::net::{CrewIdx, Network, PatrolZoneIdx, PointIdx, SwitchIdx};
use crate::scenario::{MsOp, OptimizationInput, PointKind, RootSource};
use crate::schedule::{replay, Decisions, ReplayError, Schedule, Supply};
use crate::solver::Solution;
use crate::units::REPLAY_TOL;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("no solution values to extract a plan from")]
    NoSolution,
    #[error("{0}")]
    Replay(#[from] ReplayError),
    #[error("solution inconsistent with replay: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub enum ActionKind {
    Travel { to_loc: String },
    Patrol { patrol_zone: String, opens: Vec<String> },
    Repair { fault: String },
    SwitchOpen { switch: String },
    SwitchClose { switch: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanAction {
    pub kind: ActionKind,
    pub start: f64,
    pub finish: f64,
    /// Point index in the snapshot, for replay checks.
    #[serde(skip)]
    pub point: usize,
    #[serde(skip)]
    pub loc: PointIdx,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrewPlan {
    pub crew: String,
    #[serde(skip)]
    pub crew_idx: CrewIdx,
    pub actions: Vec<PlanAction>,
}

#[derive(Debug, Clone)]
pub struct RestorationPlan {
    pub objective: f64,
    pub crews: Vec<CrewPlan>,
    /// Final closed state per switch index.
    pub switch_closed: Vec<bool>,
    /// Supply choice per zone.
    pub supply: Vec<Supply>,
    /// Outage end per zone, minutes from the event.
    pub energization: Vec<f64>,
    /// Canonical completion time per snapshot point.
    pub finish: Vec<f64>,
    pub decisions: Decisions,
    /// Envelope values for the conservative checks, when the model
    /// carried them: (passive U, active U, passive |flow| caps, active
    /// |flow| caps) per bus / line.
    pub envelopes: Option<Envelopes>,
}

#[derive(Debug, Clone)]
pub struct Envelopes {
    pub u_low: Vec<f64>,
    pub u_high: Vec<f64>,
    pub flow_low_p: Vec<f64>,
    pub flow_low_q: Vec<f64>,
    pub flow_high_p: Vec<f64>,
    pub flow_high_q: Vec<f64>,
    pub gen_low_p: Vec<f64>,
    pub gen_low_q: Vec<f64>,
    pub gen_high_p: Vec<f64>,
    pub gen_high_q: Vec<f64>,
}

fn bit(values: &[f64], var: crate::milp::VarId) -> bool {
    values[var.0] > 0.5
}

/// Read the discrete decisions off a certified solution.
pub fn read_decisions(
    model: &MilpModel,
    input: &OptimizationInput,
    net: &Network,
    values: &[f64],
) -> Result<Decisions, ExtractError> {
    let np = input.points.len();
    let cat = &model.catalog;
    let mut arcs = Vec::new();
    for p in 0..np {
        for q in 0..np {
            if let Some(v) = cat.route[p][q] {
                if bit(values, v) {
                    arcs.push((p, q));
                }
            }
        }
    }
    let visited: Vec<bool> = (0..np).map(|p| bit(values, cat.visit[p])).collect();
    let patrol_open: Vec<bool> = cat
        .patrol_open
        .iter()
        .map(|v| v.map(|v| bit(values, v)).unwrap_or(false))
        .collect();
    let rcs_closed: Vec<bool> = cat.rcs_final.iter().map(|v| bit(values, *v)).collect();

    let mut supply = Vec::with_capacity(input.zones.len());
    for z in 0..input.zones.len() {
        if bit(values, cat.root[z]) {
            let source = net.zones[z]
                .buses
                .iter()
                .find(|b| net.buses[b.idx()].is_substation)
                .map(|_| RootSource::Substation)
                .or_else(|| {
                    net.zones[z].buses.iter().find_map(|b| {
                        cat.master_dg_var(*b)
                            .filter(|v| bit(values, *v))
                            .map(|_| RootSource::MasterDg(*b))
                    })
                });
            match source {
                Some(s) => supply.push(Supply::Root(s)),
                None => {
                    return Err(ExtractError::Inconsistent(format!(
                        "zone {} flagged as reference without a source",
                        net.zones[z].id
                    )))
                }
            }
        } else {
            let parents: Vec<usize> = cat
                .zone_parent
                .iter()
                .filter(|((_, child), v)| *child == z && bit(values, **v))
                .map(|((parent, _), _)| *parent)
                .collect();
            if parents.len() != 1 {
                return Err(ExtractError::Inconsistent(format!(
                    "zone {} has {} active supplies",
                    net.zones[z].id,
                    parents.len()
                )));
            }
            supply.push(Supply::Parent(parents[0]));
        }
    }
    Ok(Decisions {
        arcs,
        visited,
        patrol_open,
        rcs_closed,
        supply,
    })
}

/// Decompose routes, recompute canonical times through the replay
/// engine, and verify the solution's outage times agree with it.
pub fn extract_plan(
    solution: &Solution,
    model: &MilpModel,
    input: &OptimizationInput,
    net: &Network,
) -> Result<RestorationPlan, ExtractError> {
    if !solution.status.has_solution() {
        return Err(ExtractError::NoSolution);
    }
    let values = &solution.values;
    let decisions = read_decisions(model, input, net, values)?;
    let sched = replay(net, input, &decisions)?;
    check_consistency(model, input, values, &sched)?;

    // Final switch states over the whole network.
    let mut switch_closed = vec![false; net.switches.len()];
    for (e, entry) in input.ms_entries.iter().enumerate() {
        switch_closed[entry.ms.idx()] = decisions.ms_final_closed(input, e);
    }
    for (e, entry) in input.rcs_entries.iter().enumerate() {
        switch_closed[entry.rcs.idx()] = decisions.rcs_closed[e];
    }

    let crews = build_crew_plans(input, net, &decisions, &sched);
    let envelopes = read_envelopes(model, values);

    Ok(RestorationPlan {
        objective: solution.objective,
        crews,
        switch_closed,
        supply: decisions.supply.clone(),
        energization: sched.outage.clone(),
        finish: sched.finish.clone(),
        decisions,
        envelopes,
    })
}

fn check_consistency(
    model: &MilpModel,
    input: &OptimizationInput,
    values: &[f64],
    sched: &Schedule,
) -> Result<(), ExtractError> {
    // The outage vector is driven to its least fixed point by the
    // objective wherever it carries weight; allow slack elsewhere.
    for (z, zi) in input.zones.iter().enumerate() {
        let solver_t = values[model.catalog.outage[z].0];
        let replayed = sched.outage[z];
        let weighted = zi.load_p * zi.cost_rate > 0.0;
        let ok = if weighted {
            (solver_t - replayed).abs() <= REPLAY_TOL.max(1e-6 * solver_t.abs())
        } else {
            solver_t >= replayed - REPLAY_TOL
        };
        if !ok {
            return Err(ExtractError::Inconsistent(format!(
                "zone #{z}: solver outage {solver_t}, replay {replayed}"
            )));
        }
    }
    // Completion times can float above the replay where nothing binds.
    for (p, &t) in sched.finish.iter().enumerate() {
        let solver_t = values[model.catalog.finish[p].0];
        if solver_t < t - REPLAY_TOL.max(1e-6 * t.abs()) {
            return Err(ExtractError::Inconsistent(format!(
                "point {}: solver time {solver_t} beats replay {t}",
                input.points[p].name
            )));
        }
    }
    Ok(())
}

fn build_crew_plans(
    input: &OptimizationInput,
    net: &Network,
    decisions: &Decisions,
    sched: &Schedule,
) -> Vec<CrewPlan> {
    let ms_entry_of = |ms: SwitchIdx| input.ms_entries.iter().position(|e| e.ms == ms).unwrap();
    let opens_in_patrol = |pz: PatrolZoneIdx| -> Vec<String> {
        input
            .ms_entries
            .iter()
            .enumerate()
            .filter(|(e, entry)| {
                decisions.patrol_open[*e]
                    && entry
                        .patrol_open_task
                        .map(|task| {
                            matches!(
                                &input.points[task].kind,
                                PointKind::FaultTask { patrol_zone: Some(q), .. } if *q == pz
                            )
                        })
                        .unwrap_or(false)
            })
            .map(|(_, entry)| net.switches[entry.ms.idx()].id.clone())
            .collect()
    };

    let mut crews = Vec::new();
    for path in &sched.paths {
        let origin = path[0];
        let PointKind::CrewOrigin { crew, .. } = input.points[origin].kind else {
            unreachable!("paths start at crew origins")
        };
        let mut actions = Vec::new();
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            let depart = sched.finish[a];
            let delta = input.travel[a][b];
            if delta > 0.0 {
                actions.push(PlanAction {
                    kind: ActionKind::Travel {
                        to_loc: net.travel.point_ids[input.points[b].loc.idx()].clone(),
                    },
                    start: depart,
                    finish: depart + delta,
                    point: b,
                    loc: input.points[b].loc,
                });
            }
            let (kind, op) = match &input.points[b].kind {
                PointKind::FaultTask {
                    fault_id,
                    op_time,
                    patrol_zone,
                    ..
                } => match patrol_zone {
                    Some(pz) => (
                        ActionKind::Patrol {
                            patrol_zone: net.patrol_zones[pz.idx()].id.clone(),
                            opens: opens_in_patrol(*pz),
                        },
                        *op_time,
                    ),
                    None => (
                        ActionKind::Repair {
                            fault: fault_id.clone(),
                        },
                        *op_time,
                    ),
                },
                PointKind::MsFirst { ms, op_time } => {
                    let e = ms_entry_of(*ms);
                    let id = net.switches[ms.idx()].id.clone();
                    if input.ms_entries[e].closed_now {
                        (ActionKind::SwitchOpen { switch: id }, *op_time)
                    } else {
                        (ActionKind::SwitchClose { switch: id }, *op_time)
                    }
                }
                PointKind::MsSecond { ms, op_time } => (
                    ActionKind::SwitchClose {
                        switch: net.switches[ms.idx()].id.clone(),
                    },
                    *op_time,
                ),
                PointKind::CrewOrigin { .. } => unreachable!("no arcs into origins"),
            };
            actions.push(PlanAction {
                kind,
                start: sched.finish[b] - op,
                finish: sched.finish[b],
                point: b,
                loc: input.points[b].loc,
            });
        }
        crews.push(CrewPlan {
            crew: net.crews[crew.idx()].id.clone(),
            crew_idx: crew,
            actions,
        });
    }
    crews
}

fn read_envelopes(model: &MilpModel, values: &[f64]) -> Option<Envelopes> {
    let PfVars::Conservative { passive, active } = &model.catalog.pf else {
        return None;
    };
    if passive.u.is_empty() {
        return None;
    }
    let take = |v: &crate::milp::VarId| values[v.0];
    let take_gen = |g: &Option<crate::milp::VarId>| g.map(|v| values[v.0]).unwrap_or(0.0);
    Some(Envelopes {
        u_low: passive.u.iter().map(take).collect(),
        u_high: active.u.iter().map(take).collect(),
        flow_low_p: passive.flow_p.iter().map(take).collect(),
        flow_low_q: passive.flow_q.iter().map(take).collect(),
        flow_high_p: active.flow_p.iter().map(take).collect(),
        flow_high_q: active.flow_q.iter().map(take).collect(),
        gen_low_p: passive.gen_p.iter().map(take_gen).collect(),
        gen_low_q: passive.gen_q.iter().map(take_gen).collect(),
        gen_high_p: active.gen_p.iter().map(take_gen).collect(),
        gen_high_q: active.gen_q.iter().map(take_gen).collect(),
    })
}

/// Per-switch manual operation count in a plan; the simulator enforces
/// the global two-operation budget across the whole incident.
pub fn ms_ops_in_plan(plan: &RestorationPlan, net: &Network) -> Vec<usize> {
    let mut count = vec![0usize; net.switches.len()];
    for crew in &plan.crews {
        for action in &crew.actions {
            match &action.kind {
                ActionKind::SwitchOpen { switch } | ActionKind::SwitchClose { switch } => {
                    if let Some(s) = net.switch(switch) {
                        count[s.idx()] += 1;
                    }
                }
                ActionKind::Patrol { opens, .. } => {
                    for id in opens {
                        if let Some(s) = net.switch(id) {
                            count[s.idx()] += 1;
                        }
                    }
                }
                _ => {}
            }
        }
    }
    count
}

/// Serialize for the plan.json artifact.
pub fn plan_to_json(plan: &RestorationPlan, net: &Network) -> serde_json::Value {
    let supply: serde_json::Map<String, serde_json::Value> = plan
        .supply
        .iter()
        .enumerate()
        .map(|(z, s)| {
            let v = match s {
                Supply::Root(RootSource::Substation) => serde_json::json!({"root": "substation"}),
                Supply::Root(RootSource::MasterDg(bus)) => {
                    serde_json::json!({"root": "master_dg", "bus": net.buses[bus.idx()].id})
                }
                Supply::Parent(p) => serde_json::json!({"parent": net.zones[*p].id}),
            };
            (net.zones[z].id.clone(), v)
        })
        .collect();
    let switches: serde_json::Map<String, serde_json::Value> = net
        .switches
        .iter()
        .enumerate()
        .map(|(s, sw)| (sw.id.clone(), serde_json::json!(plan.switch_closed[s])))
        .collect();
    let energization: serde_json::Map<String, serde_json::Value> = plan
        .energization
        .iter()
        .enumerate()
        .map(|(z, t)| (net.zones[z].id.clone(), serde_json::json!(t)))
        .collect();
    serde_json::json!({
        "objective_usd": plan.objective,
        "crews": plan.crews,
        "switch_final_closed": switches,
        "zone_supply": supply,
        "zone_energization_min": energization,
    })
}

/// Helper bundling the line-status terms a validator needs to recover
/// the final closed-line set.
pub fn closed_lines(plan: &RestorationPlan, net: &Network) -> Vec<bool> {
    net.lines
        .iter()
        .map(|line| match line.switch {
            None => true,
            Some(s) => plan.switch_closed[s.idx()],
        })
        .collect()
}

/// Line-status value at a solution, for models where a validator works
/// straight off the catalog.
pub fn line_status_value(term: LineStatusTerm, values: &[f64]) -> f64 {
    term.value_at(values)
}
