//! The optimizer's evolving knowledge: revealed and hypothetical faults,
//! crew positions and tasks, switch operation budgets, and the snapshot
//! handed to the model builder at each re-optimization.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::net::{
    BusIdx, CrewIdx, Equipment, Network, PatrolZone, PatrolZoneIdx, PointIdx, SwitchIdx,
    SwitchKind, ZoneIdx,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{context}: unknown {kind} {id:?}")]
    DanglingRef {
        context: String,
        kind: &'static str,
        id: String,
    },
    #[error("{0}")]
    State(String),
}

/// Expected repair time of the hypothetical fault standing in for an
/// unpatrolled area: patrol duration plus probability-weighted repair
/// time of the area's equipment.
pub fn hypothetical_repair_time(pz: &PatrolZone) -> f64 {
    expected_time(pz.patrol_time, &pz.equipment)
}

pub(crate) fn expected_time(patrol_time: f64, equipment: &[Equipment]) -> f64 {
    patrol_time
        + equipment
            .iter()
            .map(|e| e.repair_time * e.failure_prob)
            .sum::<f64>()
}

// ---------------------------------------------------------------------------
// Ground truth

/// A real fault, hidden from the optimizer until the patrol zone covering
/// its electrical zone has been patrolled.
#[derive(Debug, Clone)]
pub struct TrueFault {
    pub id: String,
    pub location: PointIdx,
    pub zone: ZoneIdx,
    pub repair_time: f64,
}

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub faults: Vec<TrueFault>,
    /// Effective equipment table per patrol zone (scenario overrides
    /// applied over the network's defaults).
    pub equipment: Vec<Vec<Equipment>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    faults: Vec<FaultRec>,
    #[serde(default)]
    equipment_overrides: Vec<OverrideRec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FaultRec {
    id: String,
    location: String,
    zone: String,
    repair_min: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideRec {
    patrol_zone: String,
    equipment: Vec<EquipRec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EquipRec {
    id: String,
    repair_min: f64,
    failure_prob: f64,
}

pub fn load_scenario(path: &Path, net: &Network) -> Result<GroundTruth, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_scenario_str(&text, net)
}

pub fn load_scenario_str(text: &str, net: &Network) -> Result<GroundTruth, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    let mut faults = Vec::new();
    for f in &file.faults {
        let location = net.travel.point(&f.location).ok_or_else(|| {
            ScenarioError::DanglingRef {
                context: format!("fault {}", f.id),
                kind: "point",
                id: f.location.clone(),
            }
        })?;
        let zone = net.zone(&f.zone).ok_or_else(|| ScenarioError::DanglingRef {
            context: format!("fault {}", f.id),
            kind: "zone",
            id: f.zone.clone(),
        })?;
        if f.repair_min <= 0.0 {
            return Err(ScenarioError::State(format!(
                "fault {}: repair_min must be > 0",
                f.id
            )));
        }
        faults.push(TrueFault {
            id: f.id.clone(),
            location,
            zone,
            repair_time: f.repair_min,
        });
    }
    let mut equipment: Vec<Vec<Equipment>> = net
        .patrol_zones
        .iter()
        .map(|q| q.equipment.clone())
        .collect();
    for ov in &file.equipment_overrides {
        let q = net
            .patrol_zone(&ov.patrol_zone)
            .ok_or_else(|| ScenarioError::DanglingRef {
                context: "equipment_overrides".into(),
                kind: "patrol zone",
                id: ov.patrol_zone.clone(),
            })?;
        equipment[q.idx()] = ov
            .equipment
            .iter()
            .map(|e| Equipment {
                id: e.id.clone(),
                repair_time: e.repair_min,
                failure_prob: e.failure_prob,
            })
            .collect();
    }
    Ok(GroundTruth { faults, equipment })
}

// ---------------------------------------------------------------------------
// Live state

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultStatus {
    Hypothetical,
    Revealed,
    Repaired,
}

#[derive(Debug, Clone)]
pub struct Fault {
    pub id: String,
    pub location: PointIdx,
    /// Zones this fault keeps de-energized. One zone for a real fault,
    /// every covered zone for a hypothetical one.
    pub zones: Vec<ZoneIdx>,
    /// The patrol zone a hypothetical fault stands in for.
    pub patrol_zone: Option<PatrolZoneIdx>,
    pub repair_time: f64,
    /// Minutes of repair work already performed.
    pub work_done: f64,
    pub status: FaultStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MsOp {
    Open,
    Close,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CrewTask {
    Idle,
    Traveling { to: PointIdx, remaining: f64 },
    Patrolling { pz: PatrolZoneIdx, remaining: f64 },
    Repairing { fault: usize, remaining: f64 },
    Switching { ms: SwitchIdx, op: MsOp, remaining: f64 },
    /// On site, waiting for the close gate (child side clear and parent
    /// energized) before starting the switching work.
    WaitingToClose { ms: SwitchIdx },
}

#[derive(Debug, Clone)]
pub struct CrewState {
    pub crew: CrewIdx,
    pub at: PointIdx,
    pub task: CrewTask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootSource {
    Substation,
    MasterDg(BusIdx),
}

#[derive(Debug, Clone)]
pub struct ScenarioState {
    /// Minutes since the event.
    pub clock: f64,
    pub crews: Vec<CrewState>,
    pub unpatrolled: BTreeSet<PatrolZoneIdx>,
    /// Minutes of patrol already performed per patrol zone.
    pub patrol_done: Vec<f64>,
    pub faults: Vec<Fault>,
    /// Current open/closed state per switch (MS and RCS).
    pub switch_closed: Vec<bool>,
    /// Manual operations already performed per switch.
    pub ms_ops_done: Vec<u8>,
    /// Energization time per zone, if already energized.
    pub energized: Vec<Option<f64>>,
    pub realized_root: Vec<Option<RootSource>>,
    pub realized_parent: Vec<Option<(ZoneIdx, SwitchIdx)>>,
    /// Earliest admissible energization per zone; raised when a pending
    /// switching commitment touches the zone boundary.
    pub not_before: Vec<f64>,
    pub pz_equipment: Vec<Vec<Equipment>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Discovery {
    PatrolComplete { pz: PatrolZoneIdx },
    FaultFound { fault: usize },
}

impl ScenarioState {
    /// Fresh post-event state: everything unpatrolled and de-energized,
    /// one hypothetical fault per patrol zone, crews idle at depots.
    pub fn post_event(net: &Network, truth: &GroundTruth) -> Self {
        let mut faults = Vec::new();
        for (qi, pz) in net.patrol_zones.iter().enumerate() {
            faults.push(Fault {
                id: format!("hyp:{}", pz.id),
                location: pz.location,
                zones: pz.electrical_zones.clone(),
                patrol_zone: Some(PatrolZoneIdx(qi)),
                repair_time: expected_time(pz.patrol_time, &truth.equipment[qi]),
                work_done: 0.0,
                status: FaultStatus::Hypothetical,
            });
        }
        ScenarioState {
            clock: 0.0,
            crews: net
                .crews
                .iter()
                .enumerate()
                .map(|(ci, c)| CrewState {
                    crew: CrewIdx(ci),
                    at: c.start,
                    task: CrewTask::Idle,
                })
                .collect(),
            unpatrolled: (0..net.patrol_zones.len()).map(PatrolZoneIdx).collect(),
            patrol_done: vec![0.0; net.patrol_zones.len()],
            faults,
            switch_closed: net.switches.iter().map(|s| s.initially_closed).collect(),
            ms_ops_done: vec![0; net.switches.len()],
            energized: vec![None; net.zones.len()],
            realized_root: vec![None; net.zones.len()],
            realized_parent: vec![None; net.zones.len()],
            not_before: vec![0.0; net.zones.len()],
            pz_equipment: truth.equipment.clone(),
        }
    }

    /// Complete the patrol of `pz`: drop its hypothetical fault and
    /// reveal the area's real faults with their true repair times.
    pub fn reveal_zone(
        &mut self,
        net: &Network,
        pz: PatrolZoneIdx,
        truth: &GroundTruth,
    ) -> Result<Vec<Discovery>, ScenarioError> {
        if !self.unpatrolled.remove(&pz) {
            return Err(ScenarioError::State(format!(
                "patrol zone {} was already patrolled",
                net.patrol_zones[pz.idx()].id
            )));
        }
        self.patrol_done[pz.idx()] = net.patrol_zones[pz.idx()].patrol_time;
        self.faults
            .retain(|f| f.patrol_zone != Some(pz) || f.status != FaultStatus::Hypothetical);
        let mut events = vec![Discovery::PatrolComplete { pz }];
        let covered = &net.patrol_zones[pz.idx()].electrical_zones;
        let mut new_faults: Vec<&TrueFault> = truth
            .faults
            .iter()
            .filter(|f| covered.contains(&f.zone))
            .collect();
        new_faults.sort_by(|a, b| a.id.cmp(&b.id));
        for tf in new_faults {
            self.faults.push(Fault {
                id: tf.id.clone(),
                location: tf.location,
                zones: vec![tf.zone],
                patrol_zone: None,
                repair_time: tf.repair_time,
                work_done: 0.0,
                status: FaultStatus::Revealed,
            });
            events.push(Discovery::FaultFound {
                fault: self.faults.len() - 1,
            });
        }
        Ok(events)
    }

    pub fn all_revealed_repaired(&self) -> bool {
        self.faults
            .iter()
            .all(|f| f.status != FaultStatus::Revealed)
    }

    pub fn all_energized(&self) -> bool {
        self.energized.iter().all(|e| e.is_some())
    }
}

// ---------------------------------------------------------------------------
// Snapshot handed to the model builder

#[derive(Debug, Clone, PartialEq)]
pub enum PointKind {
    CrewOrigin { crew: CrewIdx, available: f64 },
    /// Repairing a revealed fault, or patrolling an area when the task
    /// stands in for a hypothetical fault.
    FaultTask {
        fault_id: String,
        zones: Vec<ZoneIdx>,
        op_time: f64,
        patrol_zone: Option<PatrolZoneIdx>,
    },
    MsFirst { ms: SwitchIdx, op_time: f64 },
    MsSecond { ms: SwitchIdx, op_time: f64 },
}

#[derive(Debug, Clone)]
pub struct TaskPoint {
    pub name: String,
    pub loc: PointIdx,
    pub kind: PointKind,
}

#[derive(Debug, Clone)]
pub struct MsEntry {
    pub ms: SwitchIdx,
    /// Current switch state, playing the role of the initial status.
    pub closed_now: bool,
    pub first_point: Option<usize>,
    pub second_point: Option<usize>,
    /// Point index of the owning patrol task when during-patrol opening
    /// is still available.
    pub patrol_open_task: Option<usize>,
    /// Realized connector between energized zones: no further operations.
    pub pinned_noop: bool,
}

#[derive(Debug, Clone)]
pub struct RcsEntry {
    pub rcs: SwitchIdx,
    pub pinned_closed: bool,
}

#[derive(Debug, Clone)]
pub struct ZoneInfo {
    pub zone: ZoneIdx,
    pub load_p: f64,
    pub cost_rate: f64,
    pub energized_at: Option<f64>,
    pub pinned_root: Option<RootSource>,
    pub pinned_parent: Option<ZoneIdx>,
    pub not_before: f64,
}

/// Crew-role restriction used by the separate patrol/repair baseline:
/// patrol crews may only service patrol tasks, the rest only repairs and
/// switching.
#[derive(Debug, Clone)]
pub struct RoleSplit {
    pub patrol_crews: BTreeSet<CrewIdx>,
}

#[derive(Debug, Clone)]
pub struct OptimizationInput {
    pub now: f64,
    pub horizon: f64,
    pub points: Vec<TaskPoint>,
    pub crew_origins: Vec<usize>,
    pub fault_tasks: Vec<usize>,
    pub ms_entries: Vec<MsEntry>,
    pub rcs_entries: Vec<RcsEntry>,
    pub zones: Vec<ZoneInfo>,
    /// Travel minutes between task points.
    pub travel: Vec<Vec<f64>>,
    pub role_split: Option<RoleSplit>,
}

impl OptimizationInput {
    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    pub fn max_travel(&self) -> f64 {
        self.travel
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &v| acc.max(v))
    }
}

/// Project the live state onto the point sets and pins the builder
/// consumes. In-transit crews are anchored at their destination with the
/// residual travel folded into their availability; in-progress work
/// appears with its remaining duration and zero travel distance for the
/// crew already on site.
pub fn snapshot_for_optimization(
    state: &ScenarioState,
    net: &Network,
    horizon: f64,
) -> OptimizationInput {
    let mut points = Vec::new();
    let mut crew_origins = Vec::new();
    let mut fault_tasks = Vec::new();

    // Switching work already under way is committed: the snapshot sees
    // the post-operation switch state, the consumed operation budget,
    // and the completion instant as a floor on both neighbor zones.
    let mut switch_closed = state.switch_closed.clone();
    let mut ms_ops_done = state.ms_ops_done.clone();
    let mut not_before: Vec<f64> = state
        .not_before
        .iter()
        .map(|t| t.max(state.clock))
        .collect();
    for cs in &state.crews {
        if let CrewTask::Switching { ms, op, remaining } = &cs.task {
            switch_closed[ms.idx()] = *op == MsOp::Close;
            ms_ops_done[ms.idx()] = ms_ops_done[ms.idx()].saturating_add(1);
            let (za, zb) = net.switch_zones(*ms);
            for z in [za, zb] {
                if state.energized[z.idx()].is_none() {
                    not_before[z.idx()] = not_before[z.idx()].max(state.clock + remaining);
                }
            }
        }
    }

    for cs in &state.crews {
        let (loc, available) = match &cs.task {
            CrewTask::Traveling { to, remaining } => (*to, state.clock + remaining),
            CrewTask::Switching { remaining, .. } => (cs.at, state.clock + remaining),
            _ => (cs.at, state.clock),
        };
        crew_origins.push(points.len());
        points.push(TaskPoint {
            name: format!("crew.{}", net.crews[cs.crew.idx()].id),
            loc,
            kind: PointKind::CrewOrigin {
                crew: cs.crew,
                available,
            },
        });
    }

    // Hypothetical-fault task per unpatrolled zone, recomputed from the
    // remaining patrol time at this snapshot.
    let mut patrol_task_of: Vec<Option<usize>> = vec![None; net.patrol_zones.len()];
    for (fi, f) in state.faults.iter().enumerate() {
        let _ = fi;
        match f.status {
            FaultStatus::Hypothetical => {
                let pz = f.patrol_zone.expect("hypothetical fault has a patrol zone");
                if !state.unpatrolled.contains(&pz) {
                    continue;
                }
                let remaining_patrol =
                    net.patrol_zones[pz.idx()].patrol_time - state.patrol_done[pz.idx()];
                let op_time =
                    expected_time(remaining_patrol.max(0.0), &state.pz_equipment[pz.idx()]);
                patrol_task_of[pz.idx()] = Some(points.len());
                fault_tasks.push(points.len());
                points.push(TaskPoint {
                    name: format!("patrol.{}", net.patrol_zones[pz.idx()].id),
                    loc: f.location,
                    kind: PointKind::FaultTask {
                        fault_id: f.id.clone(),
                        zones: f.zones.clone(),
                        op_time,
                        patrol_zone: Some(pz),
                    },
                });
            }
            FaultStatus::Revealed => {
                fault_tasks.push(points.len());
                points.push(TaskPoint {
                    name: format!("fault.{}", f.id),
                    loc: f.location,
                    kind: PointKind::FaultTask {
                        fault_id: f.id.clone(),
                        zones: f.zones.clone(),
                        op_time: f.repair_time - f.work_done,
                        patrol_zone: None,
                    },
                });
            }
            FaultStatus::Repaired => {}
        }
    }

    let mut ms_entries = Vec::new();
    let mut rcs_entries = Vec::new();
    let pinned_connectors: BTreeSet<SwitchIdx> = state
        .realized_parent
        .iter()
        .flatten()
        .map(|(_, sw)| *sw)
        .collect();
    for (si, sw) in net.switches.iter().enumerate() {
        let s = SwitchIdx(si);
        let closed_now = switch_closed[si];
        match sw.kind {
            SwitchKind::Rcs => rcs_entries.push(RcsEntry {
                rcs: s,
                pinned_closed: pinned_connectors.contains(&s),
            }),
            SwitchKind::Ms => {
                let ops_left = 2u8.saturating_sub(ms_ops_done[si]);
                let pinned_noop = pinned_connectors.contains(&s);
                let op_time = sw.ms_op_time.expect("MS has an op time");
                let loc = sw.location.expect("MS has a location");
                let mut entry = MsEntry {
                    ms: s,
                    closed_now,
                    first_point: None,
                    second_point: None,
                    patrol_open_task: None,
                    pinned_noop,
                };
                if !pinned_noop {
                    // Remaining-operation patterns: an untouched closed MS
                    // can be opened then re-closed; an open MS with budget
                    // can be closed once; anything else stays put.
                    let open_close = closed_now && ops_left == 2;
                    let close_only = !closed_now && ops_left >= 1;
                    if open_close || close_only {
                        entry.first_point = Some(points.len());
                        points.push(TaskPoint {
                            name: format!("ms1.{}", sw.id),
                            loc,
                            kind: PointKind::MsFirst { ms: s, op_time },
                        });
                    }
                    if open_close {
                        entry.second_point = Some(points.len());
                        points.push(TaskPoint {
                            name: format!("ms2.{}", sw.id),
                            loc,
                            kind: PointKind::MsSecond { ms: s, op_time },
                        });
                        if let Some(owner) = net.owning_patrol_zone(s) {
                            entry.patrol_open_task = patrol_task_of[owner.idx()];
                        }
                    }
                }
                ms_entries.push(entry);
            }
        }
    }

    let zones = net
        .zones
        .iter()
        .enumerate()
        .map(|(zi, z)| ZoneInfo {
            zone: ZoneIdx(zi),
            load_p: z.load_p,
            cost_rate: z.outage_cost_rate,
            energized_at: state.energized[zi],
            pinned_root: state.realized_root[zi],
            pinned_parent: state.realized_parent[zi].map(|(p, _)| p),
            not_before: not_before[zi],
        })
        .collect();

    let travel: Vec<Vec<f64>> = points
        .iter()
        .map(|a| {
            points
                .iter()
                .map(|b| net.travel.between(a.loc, b.loc))
                .collect()
        })
        .collect();

    OptimizationInput {
        now: state.clock,
        horizon,
        points,
        crew_origins,
        fault_tasks,
        ms_entries,
        rcs_entries,
        zones,
        travel,
        role_split: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Equipment;
    use crate::synth;

    fn equip(entries: &[(f64, f64)]) -> Vec<Equipment> {
        entries
            .iter()
            .enumerate()
            .map(|(i, (t, p))| Equipment {
                id: format!("e{i}"),
                repair_time: *t,
                failure_prob: *p,
            })
            .collect()
    }

    #[test]
    fn expected_repair_time_formula() {
        assert_eq!(expected_time(20.0, &equip(&[(120.0, 0.1), (60.0, 0.5)])), 62.0);
        assert_eq!(expected_time(15.0, &[]), 15.0);
        assert_eq!(expected_time(30.0, &equip(&[(100.0, 1.0)])), 130.0);
    }

    #[test]
    fn reveal_zone_swaps_hypothetical_for_truth() {
        let net = synth::desk13_net();
        let truth = synth::desk13_scenario(7);
        let mut state = ScenarioState::post_event(&net, &truth);
        let n_hyp = state.faults.len();
        assert_eq!(n_hyp, net.patrol_zones.len());

        // A patrol zone that covers at least one true fault.
        let pz = net
            .patrol_zones
            .iter()
            .position(|q| {
                truth
                    .faults
                    .iter()
                    .any(|f| q.electrical_zones.contains(&f.zone))
            })
            .map(PatrolZoneIdx)
            .expect("some faulted patrol zone");
        let expected = truth
            .faults
            .iter()
            .filter(|f| net.patrol_zones[pz.idx()].electrical_zones.contains(&f.zone))
            .count();

        let events = state.reveal_zone(&net, pz, &truth).unwrap();
        assert_eq!(events.len(), 1 + expected);
        assert!(matches!(events[0], Discovery::PatrolComplete { .. }));
        assert!(!state.unpatrolled.contains(&pz));
        assert!(!state
            .faults
            .iter()
            .any(|f| f.patrol_zone == Some(pz) && f.status == FaultStatus::Hypothetical));
        assert!(state.reveal_zone(&net, pz, &truth).is_err());
    }

    #[test]
    fn reveal_zone_with_no_damage() {
        let net = synth::two_zone_net();
        let truth = GroundTruth {
            faults: vec![],
            equipment: net.patrol_zones.iter().map(|q| q.equipment.clone()).collect(),
        };
        let mut state = ScenarioState::post_event(&net, &truth);
        let events = state.reveal_zone(&net, PatrolZoneIdx(0), &truth).unwrap();
        assert_eq!(events.len(), 1);
    }

    #[test]
    fn snapshot_counts_and_residuals() {
        let net = synth::desk13_net();
        let truth = synth::desk13_scenario(3);
        let mut state = ScenarioState::post_event(&net, &truth);

        // Fresh event: one hypothetical task per patrol zone.
        let snap = snapshot_for_optimization(&state, &net, 1440.0);
        assert_eq!(snap.fault_tasks.len(), net.patrol_zones.len());
        assert_eq!(snap.crew_origins.len(), net.crews.len());

        // Reveal everything; only true faults remain as tasks.
        let pzs: Vec<_> = state.unpatrolled.iter().copied().collect();
        for pz in pzs {
            state.reveal_zone(&net, pz, &truth).unwrap();
        }
        let snap = snapshot_for_optimization(&state, &net, 1440.0);
        assert_eq!(snap.fault_tasks.len(), truth.faults.len());

        // A crew mid-repair: residual time, zero travel from its origin.
        let f0 = state
            .faults
            .iter()
            .position(|f| f.status == FaultStatus::Revealed)
            .unwrap();
        state.clock = 100.0;
        state.faults[f0].work_done = 30.0;
        let loc = state.faults[f0].location;
        state.crews[0].at = loc;
        state.crews[0].task = CrewTask::Repairing {
            fault: f0,
            remaining: state.faults[f0].repair_time - 30.0,
        };
        let snap = snapshot_for_optimization(&state, &net, 1440.0);
        let task = snap
            .points
            .iter()
            .position(|p| matches!(&p.kind, PointKind::FaultTask { fault_id, .. } if *fault_id == state.faults[f0].id))
            .unwrap();
        let origin = snap.crew_origins[0];
        match &snap.points[task].kind {
            PointKind::FaultTask { op_time, .. } => {
                assert!((op_time - (state.faults[f0].repair_time - 30.0)).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
        assert_eq!(snap.travel[origin][task], 0.0);
    }

    #[test]
    fn in_transit_crews_anchor_at_destination() {
        let net = synth::two_zone_net();
        let truth = GroundTruth {
            faults: vec![],
            equipment: net.patrol_zones.iter().map(|q| q.equipment.clone()).collect(),
        };
        let mut state = ScenarioState::post_event(&net, &truth);
        state.clock = 12.0;
        let dest = net.patrol_zones[0].location;
        state.crews[0].task = CrewTask::Traveling {
            to: dest,
            remaining: 4.5,
        };
        let snap = snapshot_for_optimization(&state, &net, 1440.0);
        match &snap.points[snap.crew_origins[0]].kind {
            PointKind::CrewOrigin { available, .. } => assert!((available - 16.5).abs() < 1e-12),
            _ => unreachable!(),
        }
        assert_eq!(snap.points[snap.crew_origins[0]].loc, dest);
    }
}
