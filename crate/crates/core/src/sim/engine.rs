//! The monitoring loop: commit a plan, execute crew actions against the
//! ground truth, reveal damage as patrols finish, re-optimize on
//! discoveries (responsive) and on a timer (proactive), and energize
//! components the moment they are clear and supplied.

use std::collections::VecDeque;
use std::time::Instant;

use crate::milp::{assemble, build_patrol_makespan};
use crate::net::{BusIdx, Network, PatrolZoneIdx, PointIdx, SwitchIdx, ZoneIdx};
use crate::plan::{extract_plan, ActionKind, PlanAction, RestorationPlan};
use crate::scenario::{
    snapshot_for_optimization, CrewTask, Discovery, FaultStatus, GroundTruth, MsOp,
    OptimizationInput, PointKind, RoleSplit, RootSource, ScenarioState,
};
use crate::schedule::{crew_paths, Decisions, Supply};
use crate::sim::{Baseline, EventKind, PolicyConfig, SimError, Timeline};
use crate::solver::{solve, SolveStatus};

#[derive(Debug, Clone, PartialEq)]
enum Activity {
    Travel { to: PointIdx },
    Patrol { pz: PatrolZoneIdx, opens: Vec<SwitchIdx> },
    Repair { fault: usize },
    Switch { ms: SwitchIdx, close: bool },
    WaitClose { ms: SwitchIdx, parent: usize, child: usize },
}

#[derive(Debug, Clone)]
struct CrewExec {
    at: PointIdx,
    busy_until: f64,
    current: Option<Activity>,
    program: VecDeque<PlanAction>,
}

struct Engine<'a> {
    net: &'a Network,
    truth: &'a GroundTruth,
    policy: &'a PolicyConfig,
    state: ScenarioState,
    crews: Vec<CrewExec>,
    timeline: Timeline,
    /// Remote closes from the current plan waiting for their gate.
    pending_rcs: Vec<(SwitchIdx, usize, usize)>,
    current_supply: Vec<Supply>,
    current_masters: Vec<BusIdx>,
    last_reopt: f64,
    responsive_at: Option<f64>,
    steps: usize,
    role_split: Option<RoleSplit>,
    reopt_enabled: bool,
}

pub fn run_simulation(
    net: &Network,
    truth: &GroundTruth,
    policy: &PolicyConfig,
) -> Result<Timeline, SimError> {
    policy.validate()?;
    match &policy.baseline {
        Baseline::None => {}
        Baseline::Fptr => return run_baseline_fptr(net, truth, policy),
        Baseline::Sprc { patrol_crews } => {
            return run_baseline_sprc(net, truth, policy, patrol_crews.clone())
        }
    }
    let mut engine = Engine::new(net, truth, policy, None);
    engine.reoptimize("initial")?;
    engine.drive_until(|e| e.done())?;
    Ok(engine.finish())
}

/// Patrol everything first with a makespan-optimal routing, then run the
/// full method over the revealed damage.
pub fn run_baseline_fptr(
    net: &Network,
    truth: &GroundTruth,
    policy: &PolicyConfig,
) -> Result<Timeline, SimError> {
    policy.validate()?;
    let mut engine = Engine::new(net, truth, policy, None);
    engine.reopt_enabled = false;
    engine.commit_patrol_plan()?;
    engine.drive_until(|e| e.state.unpatrolled.is_empty())?;
    if engine.timeline.aborted().is_none() && !engine.done() {
        engine.reopt_enabled = true;
        engine.reoptimize("patrol-complete")?;
        engine.drive_until(|e| e.done())?;
    }
    Ok(engine.finish())
}

/// Dedicated patrol crews; the others only repair and switch, driven by
/// progressively revealed information.
pub fn run_baseline_sprc(
    net: &Network,
    truth: &GroundTruth,
    policy: &PolicyConfig,
    patrol_crews: Vec<crate::net::CrewIdx>,
) -> Result<Timeline, SimError> {
    policy.validate()?;
    if patrol_crews.is_empty() || patrol_crews.len() >= net.crews.len() {
        return Err(SimError::Config(
            "patrol crews must be a non-empty proper subset (some crews must repair)".into(),
        ));
    }
    let split = RoleSplit {
        patrol_crews: patrol_crews.into_iter().collect(),
    };
    let mut engine = Engine::new(net, truth, policy, Some(split));
    engine.reoptimize("initial")?;
    engine.drive_until(|e| e.done())?;
    Ok(engine.finish())
}

impl Timeline {
    fn new(net: &Network) -> Self {
        Timeline {
            events: Vec::new(),
            completed: false,
            completion_min: None,
            energized_min: vec![f64::NAN; net.zones.len()],
            reopt_times: Vec::new(),
            plans: Vec::new(),
            final_plan_energization: vec![f64::NAN; net.zones.len()],
            travel_minutes: 0.0,
        }
    }

    pub fn aborted(&self) -> Option<&str> {
        self.events.iter().rev().find_map(|e| match &e.kind {
            EventKind::Aborted { reason } => Some(reason.as_str()),
            _ => None,
        })
    }
}

impl<'a> Engine<'a> {
    fn new(
        net: &'a Network,
        truth: &'a GroundTruth,
        policy: &'a PolicyConfig,
        role_split: Option<RoleSplit>,
    ) -> Self {
        let state = ScenarioState::post_event(net, truth);
        let crews = state
            .crews
            .iter()
            .map(|c| CrewExec {
                at: c.at,
                busy_until: 0.0,
                current: None,
                program: VecDeque::new(),
            })
            .collect();
        Engine {
            net,
            truth,
            policy,
            state,
            crews,
            timeline: Timeline::new(net),
            pending_rcs: Vec::new(),
            current_supply: Vec::new(),
            current_masters: Vec::new(),
            last_reopt: 0.0,
            responsive_at: None,
            steps: 0,
            role_split,
            reopt_enabled: true,
        }
    }

    fn now(&self) -> f64 {
        self.state.clock
    }

    fn done(&self) -> bool {
        self.state.unpatrolled.is_empty()
            && self.state.all_revealed_repaired()
            && self.state.all_energized()
    }

    fn finish(mut self) -> Timeline {
        if self.done() {
            self.timeline.completed = true;
            let mut worst = 0.0f64;
            for v in &self.timeline.energized_min {
                worst = worst.max(*v);
            }
            self.timeline.completion_min = Some(worst);
        }
        self.timeline
    }

    fn crew_id(&self, ci: usize) -> String {
        self.net.crews[ci].id.clone()
    }

    /// Reflect execution state into the scenario state for snapshotting.
    fn sync_state(&mut self) {
        let now = self.now();
        for (ci, exec) in self.crews.iter().enumerate() {
            let remaining = (exec.busy_until - now).max(0.0);
            let task = match &exec.current {
                None => CrewTask::Idle,
                Some(Activity::Travel { to }) => CrewTask::Traveling { to: *to, remaining },
                Some(Activity::Patrol { pz, .. }) => CrewTask::Patrolling { pz: *pz, remaining },
                Some(Activity::Repair { fault }) => {
                    let f = &mut self.state.faults[*fault];
                    f.work_done = f.repair_time - remaining;
                    CrewTask::Repairing {
                        fault: *fault,
                        remaining,
                    }
                }
                Some(Activity::Switch { ms, close }) => CrewTask::Switching {
                    ms: *ms,
                    op: if *close { MsOp::Close } else { MsOp::Open },
                    remaining,
                },
                Some(Activity::WaitClose { ms, .. }) => CrewTask::WaitingToClose { ms: *ms },
            };
            self.state.crews[ci].at = exec.at;
            self.state.crews[ci].task = task;
        }
        for exec in &self.crews {
            if let Some(Activity::Patrol { pz, .. }) = &exec.current {
                let total = self.net.patrol_zones[pz.idx()].patrol_time;
                let remaining = (exec.busy_until - now).max(0.0);
                self.state.patrol_done[pz.idx()] = (total - remaining).max(0.0);
            }
        }
    }

    fn reoptimize(&mut self, reason: &str) -> Result<(), SimError> {
        self.sync_state();
        let now = self.now();
        let mut input = snapshot_for_optimization(&self.state, self.net, self.policy.horizon);
        input.role_split = self.role_split.clone();

        let started = Instant::now();
        let model = assemble(self.net, &input, self.policy.pf_mode)?;
        let solution = solve(&model, &self.policy.solve)?;
        let solve_ms = started.elapsed().as_millis();
        match solution.status {
            SolveStatus::Infeasible => return Err(SimError::Infeasible { at: now }),
            SolveStatus::Timeout => return Err(SimError::SolverTimeout { at: now }),
            _ => {}
        }
        let plan = extract_plan(&solution, &model, &input, self.net)?;

        self.steps += 1;
        let n_ms_points = input
            .points
            .iter()
            .filter(|p| matches!(p.kind, PointKind::MsFirst { .. } | PointKind::MsSecond { .. }))
            .count();
        self.timeline.push(
            now,
            EventKind::Reoptimized {
                step: self.steps,
                reason: reason.to_string(),
                n_vars: model.n_vars(),
                n_rows: model.n_rows(),
                n_integers: model.n_integers(),
                n_crews: input.crew_origins.len(),
                n_unpatrolled: self.state.unpatrolled.len(),
                n_faults: self
                    .state
                    .faults
                    .iter()
                    .filter(|f| f.status == FaultStatus::Revealed)
                    .count(),
                n_ms_points,
                solve_ms,
                objective: solution.objective,
            },
        );
        self.timeline.reopt_times.push(now);
        self.last_reopt = now;
        self.responsive_at = None;
        self.commit(plan, &input)?;
        self.propagate(now);
        Ok(())
    }

    /// Install a plan: remote switching first, then per-crew programs.
    fn commit(
        &mut self,
        plan: RestorationPlan,
        input: &OptimizationInput,
    ) -> Result<(), SimError> {
        let now = self.now();
        self.current_supply = plan.supply.clone();
        self.current_masters = plan
            .supply
            .iter()
            .filter_map(|s| match s {
                Supply::Root(RootSource::MasterDg(b)) => Some(*b),
                _ => None,
            })
            .collect();
        self.timeline.final_plan_energization = plan.energization.clone();

        // Remote switching: opens now, closes when their gate holds.
        self.pending_rcs.clear();
        for entry in &input.rcs_entries {
            let si = entry.rcs.idx();
            let target = plan.switch_closed[si];
            let current = self.state.switch_closed[si];
            if current && !target {
                self.state.switch_closed[si] = false;
                self.timeline.push(
                    now,
                    EventKind::SwitchOp {
                        crew: None,
                        switch: self.net.switches[si].id.clone(),
                        closed: false,
                    },
                );
            } else if !current && target {
                let (za, zb) = self.net.switch_zones(entry.rcs);
                let (za, zb) = (za.idx(), zb.idx());
                let pc = if plan.supply[zb] == Supply::Parent(za) {
                    Some((za, zb))
                } else if plan.supply[za] == Supply::Parent(zb) {
                    Some((zb, za))
                } else {
                    None
                };
                match pc {
                    Some((parent, child)) => self.pending_rcs.push((entry.rcs, parent, child)),
                    None => {
                        return Err(SimError::Abort(format!(
                            "plan closes {} without a supply link across it",
                            self.net.switches[si].id
                        )))
                    }
                }
            }
        }

        // Crew programs, recognizing in-progress continuations.
        for crew_plan in &plan.crews {
            let ci = crew_plan.crew_idx.idx();
            let mut program: VecDeque<PlanAction> = crew_plan.actions.iter().cloned().collect();
            let keep = match &self.crews[ci].current {
                Some(Activity::Switch { .. }) | Some(Activity::Travel { .. }) => true,
                Some(Activity::Repair { fault }) => {
                    let fid = &self.state.faults[*fault].id;
                    let keeps = matches!(
                        program.front().map(|a| &a.kind),
                        Some(ActionKind::Repair { fault: f }) if f == fid
                    );
                    if keeps {
                        program.pop_front();
                    }
                    keeps
                }
                Some(Activity::Patrol { pz, .. }) => {
                    let pid = &self.net.patrol_zones[pz.idx()].id;
                    let keeps = matches!(
                        program.front().map(|a| &a.kind),
                        Some(ActionKind::Patrol { patrol_zone, .. }) if patrol_zone == pid
                    );
                    if keeps {
                        let Some(ActionKind::Patrol { opens, .. }) =
                            program.pop_front().map(|a| a.kind)
                        else {
                            unreachable!()
                        };
                        let new_opens: Vec<SwitchIdx> =
                            opens.iter().filter_map(|id| self.net.switch(id)).collect();
                        if let Some(Activity::Patrol { opens: o, .. }) =
                            &mut self.crews[ci].current
                        {
                            *o = new_opens;
                        }
                    }
                    keeps
                }
                Some(Activity::WaitClose { .. }) => false,
                None => false,
            };
            if !keep
                && !matches!(
                    self.crews[ci].current,
                    Some(Activity::Switch { .. }) | Some(Activity::Travel { .. })
                )
            {
                self.crews[ci].current = None;
                self.crews[ci].busy_until = now;
            }
            self.crews[ci].program = program;
        }
        for ci in 0..self.crews.len() {
            if self.crews[ci].current.is_none() {
                self.start_next(ci)?;
            }
        }
        self.timeline.plans.push(plan);
        Ok(())
    }

    /// Patrol-only plan for the patrol-first baseline.
    fn commit_patrol_plan(&mut self) -> Result<(), SimError> {
        self.sync_state();
        let now = self.now();
        let input = snapshot_for_optimization(&self.state, self.net, self.policy.horizon);
        let started = Instant::now();
        let (model, sub) = build_patrol_makespan(self.net, &input)?;
        let solution = solve(&model, &self.policy.solve)?;
        let solve_ms = started.elapsed().as_millis();
        match solution.status {
            SolveStatus::Infeasible => return Err(SimError::Infeasible { at: now }),
            SolveStatus::Timeout => return Err(SimError::SolverTimeout { at: now }),
            _ => {}
        }
        let mut arcs = Vec::new();
        for p in 0..sub.points.len() {
            for q in 0..sub.points.len() {
                if let Some(v) = model.catalog.route[p][q] {
                    if solution.values[v.0] > 0.5 {
                        arcs.push((p, q));
                    }
                }
            }
        }
        let decisions = Decisions {
            arcs,
            visited: vec![true; sub.points.len()],
            patrol_open: vec![],
            rcs_closed: vec![],
            supply: vec![],
        };
        let paths = crew_paths(&sub, &decisions)?;
        self.steps += 1;
        self.timeline.push(
            now,
            EventKind::Reoptimized {
                step: self.steps,
                reason: "patrol-phase".into(),
                n_vars: model.n_vars(),
                n_rows: model.n_rows(),
                n_integers: model.n_integers(),
                n_crews: sub.crew_origins.len(),
                n_unpatrolled: self.state.unpatrolled.len(),
                n_faults: 0,
                n_ms_points: 0,
                solve_ms,
                objective: solution.objective,
            },
        );
        self.timeline.reopt_times.push(now);
        self.last_reopt = now;
        self.current_supply = Vec::new();
        self.current_masters = Vec::new();

        for path in &paths {
            let origin = path[0];
            let PointKind::CrewOrigin { crew, .. } = sub.points[origin].kind else {
                unreachable!()
            };
            let mut program = VecDeque::new();
            for w in path.windows(2) {
                let (a, b) = (w[0], w[1]);
                let PointKind::FaultTask {
                    patrol_zone: Some(pz),
                    op_time,
                    ..
                } = &sub.points[b].kind
                else {
                    unreachable!("patrol plans only visit patrol tasks")
                };
                if sub.travel[a][b] > 0.0 {
                    program.push_back(PlanAction {
                        kind: ActionKind::Travel {
                            to_loc: self.net.travel.point_ids[sub.points[b].loc.idx()].clone(),
                        },
                        start: 0.0,
                        finish: sub.travel[a][b],
                        point: b,
                        loc: sub.points[b].loc,
                    });
                }
                program.push_back(PlanAction {
                    kind: ActionKind::Patrol {
                        patrol_zone: self.net.patrol_zones[pz.idx()].id.clone(),
                        opens: vec![],
                    },
                    start: 0.0,
                    finish: *op_time,
                    point: b,
                    loc: sub.points[b].loc,
                });
            }
            self.crews[crew.idx()].program = program;
        }
        for ci in 0..self.crews.len() {
            if self.crews[ci].current.is_none() {
                self.start_next(ci)?;
            }
        }
        Ok(())
    }

    /// Pop the crew's next committed action and start it.
    fn start_next(&mut self, ci: usize) -> Result<(), SimError> {
        let now = self.now();
        loop {
            let Some(action) = self.crews[ci].program.pop_front() else {
                self.crews[ci].current = None;
                self.crews[ci].busy_until = now;
                return Ok(());
            };
            match &action.kind {
                ActionKind::Travel { .. } => {
                    let delta = self.net.travel.between(self.crews[ci].at, action.loc);
                    if delta <= 0.0 {
                        self.crews[ci].at = action.loc;
                        continue;
                    }
                    self.timeline.push(
                        now,
                        EventKind::TravelStart {
                            crew: self.crew_id(ci),
                            to_loc: self.net.travel.point_ids[action.loc.idx()].clone(),
                        },
                    );
                    self.timeline.travel_minutes += delta;
                    self.crews[ci].current = Some(Activity::Travel { to: action.loc });
                    self.crews[ci].busy_until = now + delta;
                    return Ok(());
                }
                ActionKind::Patrol { patrol_zone, opens } => {
                    let pz = self.net.patrol_zone(patrol_zone).ok_or_else(|| {
                        SimError::Abort(format!("unknown patrol zone {patrol_zone}"))
                    })?;
                    if !self.state.unpatrolled.contains(&pz) {
                        continue;
                    }
                    let remaining = self.net.patrol_zones[pz.idx()].patrol_time
                        - self.state.patrol_done[pz.idx()];
                    let opens = opens.iter().filter_map(|id| self.net.switch(id)).collect();
                    self.crews[ci].current = Some(Activity::Patrol { pz, opens });
                    self.crews[ci].busy_until = now + remaining.max(0.0);
                    return Ok(());
                }
                ActionKind::Repair { fault } => {
                    let Some(fi) = self
                        .state
                        .faults
                        .iter()
                        .position(|f| f.id == *fault && f.status == FaultStatus::Revealed)
                    else {
                        continue;
                    };
                    let remaining =
                        self.state.faults[fi].repair_time - self.state.faults[fi].work_done;
                    self.timeline.push(
                        now,
                        EventKind::RepairStart {
                            crew: self.crew_id(ci),
                            fault: fault.clone(),
                        },
                    );
                    self.crews[ci].current = Some(Activity::Repair { fault: fi });
                    self.crews[ci].busy_until = now + remaining.max(0.0);
                    return Ok(());
                }
                ActionKind::SwitchOpen { switch } => {
                    let ms = self
                        .net
                        .switch(switch)
                        .ok_or_else(|| SimError::Abort(format!("unknown switch {switch}")))?;
                    if !self.state.switch_closed[ms.idx()] {
                        continue;
                    }
                    let (za, zb) = self.net.switch_zones(ms);
                    if self.state.energized[za.idx()].is_some()
                        && self.state.energized[zb.idx()].is_some()
                    {
                        return Err(SimError::Abort(format!(
                            "plan would open {switch} between two energized zones"
                        )));
                    }
                    let op = self.net.switches[ms.idx()].ms_op_time.unwrap_or(0.0);
                    self.crews[ci].current = Some(Activity::Switch { ms, close: false });
                    self.crews[ci].busy_until = now + op;
                    return Ok(());
                }
                ActionKind::SwitchClose { switch } => {
                    let ms = self
                        .net
                        .switch(switch)
                        .ok_or_else(|| SimError::Abort(format!("unknown switch {switch}")))?;
                    if self.state.switch_closed[ms.idx()] {
                        continue;
                    }
                    let (za, zb) = self.net.switch_zones(ms);
                    let (za, zb) = (za.idx(), zb.idx());
                    let pc = if self.current_supply.get(zb) == Some(&Supply::Parent(za)) {
                        (za, zb)
                    } else if self.current_supply.get(za) == Some(&Supply::Parent(zb)) {
                        (zb, za)
                    } else {
                        return Err(SimError::Abort(format!(
                            "plan closes {switch} without a supply link across it"
                        )));
                    };
                    if self.close_gate_holds(pc.0, pc.1) {
                        let op = self.net.switches[ms.idx()].ms_op_time.unwrap_or(0.0);
                        self.crews[ci].current = Some(Activity::Switch { ms, close: true });
                        self.crews[ci].busy_until = now + op;
                    } else {
                        self.crews[ci].current = Some(Activity::WaitClose {
                            ms,
                            parent: pc.0,
                            child: pc.1,
                        });
                        self.crews[ci].busy_until = f64::INFINITY;
                    }
                    return Ok(());
                }
            }
        }
    }

    /// Safe-close condition: the parent is energized and every zone in
    /// the child-side component is clear.
    fn close_gate_holds(&self, parent: usize, child: usize) -> bool {
        if self.state.energized[parent].is_none() {
            return false;
        }
        self.component_of(child).iter().all(|&z| self.zone_clear(z))
    }

    fn zone_clear(&self, z: usize) -> bool {
        let patrolled = self
            .net
            .patrol_zone_of(ZoneIdx(z))
            .map(|pz| !self.state.unpatrolled.contains(&pz))
            .unwrap_or(true);
        patrolled
            && !self.state.faults.iter().any(|f| {
                f.status == FaultStatus::Revealed && f.zones.iter().any(|bz| bz.idx() == z)
            })
    }

    /// Zone-level connected component under the current switch states.
    fn component_of(&self, z: usize) -> Vec<usize> {
        let mut seen = vec![false; self.net.zones.len()];
        seen[z] = true;
        let mut queue = VecDeque::from([z]);
        let mut out = vec![z];
        while let Some(u) = queue.pop_front() {
            for si in 0..self.net.switches.len() {
                if !self.state.switch_closed[si] {
                    continue;
                }
                let (za, zb) = self.net.switch_zones(SwitchIdx(si));
                let (za, zb) = (za.idx(), zb.idx());
                let other = if za == u {
                    zb
                } else if zb == u {
                    za
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    out.push(other);
                    queue.push_back(other);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Energize every all-clear component that holds a live zone, a
    /// substation, or a designated master DG; record realized roots and
    /// parents along the closed boundary switches.
    fn propagate(&mut self, t: f64) {
        loop {
            let mut changed = false;
            let mut seen = vec![false; self.net.zones.len()];
            for z0 in 0..self.net.zones.len() {
                if seen[z0] {
                    continue;
                }
                let comp = self.component_of(z0);
                for &z in &comp {
                    seen[z] = true;
                }
                if comp.iter().all(|&z| self.state.energized[z].is_some()) {
                    continue;
                }
                if !comp.iter().all(|&z| self.zone_clear(z)) {
                    continue;
                }
                let root_zone = comp
                    .iter()
                    .find(|&&z| self.state.energized[z].is_some())
                    .or_else(|| {
                        comp.iter().find(|&&z| {
                            self.net.zones[z]
                                .buses
                                .iter()
                                .any(|b| self.net.buses[b.idx()].is_substation)
                        })
                    })
                    .or_else(|| {
                        comp.iter().find(|&&z| {
                            self.current_masters
                                .iter()
                                .any(|b| self.net.zone_of_bus(*b).idx() == z)
                        })
                    })
                    .copied();
                let Some(root_zone) = root_zone else { continue };

                // BFS tree over closed boundary switches from the root.
                let mut parent: Vec<Option<(usize, SwitchIdx)>> =
                    vec![None; self.net.zones.len()];
                let mut order = vec![root_zone];
                let mut head = 0;
                let mut in_tree = vec![false; self.net.zones.len()];
                in_tree[root_zone] = true;
                while head < order.len() {
                    let u = order[head];
                    head += 1;
                    for si in 0..self.net.switches.len() {
                        if !self.state.switch_closed[si] {
                            continue;
                        }
                        let (za, zb) = self.net.switch_zones(SwitchIdx(si));
                        let (za, zb) = (za.idx(), zb.idx());
                        let other = if za == u {
                            zb
                        } else if zb == u {
                            za
                        } else {
                            continue;
                        };
                        if comp.contains(&other) && !in_tree[other] {
                            in_tree[other] = true;
                            parent[other] = Some((u, SwitchIdx(si)));
                            order.push(other);
                        }
                    }
                }
                for &z in &order {
                    if self.state.energized[z].is_some() {
                        continue;
                    }
                    self.state.energized[z] = Some(t);
                    self.timeline.energized_min[z] = t;
                    match parent[z] {
                        Some((p, sw)) => {
                            self.state.realized_parent[z] = Some((ZoneIdx(p), sw));
                        }
                        None => {
                            let src = if self.net.zones[z]
                                .buses
                                .iter()
                                .any(|b| self.net.buses[b.idx()].is_substation)
                            {
                                RootSource::Substation
                            } else if let Some(b) = self
                                .current_masters
                                .iter()
                                .find(|b| self.net.zone_of_bus(**b).idx() == z)
                            {
                                RootSource::MasterDg(*b)
                            } else {
                                RootSource::Substation
                            };
                            self.state.realized_root[z] = Some(src);
                        }
                    }
                    self.timeline.push(
                        t,
                        EventKind::ZoneEnergized {
                            zone: self.net.zones[z].id.clone(),
                        },
                    );
                }
                changed = true;
            }

            // Remote closes whose gate now holds.
            let ready: Vec<usize> = self
                .pending_rcs
                .iter()
                .enumerate()
                .filter(|(_, (_, parent, child))| self.close_gate_holds(*parent, *child))
                .map(|(k, _)| k)
                .collect();
            for k in ready.into_iter().rev() {
                let (sw, _, _) = self.pending_rcs.remove(k);
                self.state.switch_closed[sw.idx()] = true;
                self.timeline.push(
                    t,
                    EventKind::SwitchOp {
                        crew: None,
                        switch: self.net.switches[sw.idx()].id.clone(),
                        closed: true,
                    },
                );
                changed = true;
            }

            // Manual closes waiting on their gate.
            for ci in 0..self.crews.len() {
                if let Some(Activity::WaitClose { ms, parent, child }) =
                    self.crews[ci].current.clone()
                {
                    if self.close_gate_holds(parent, child) {
                        let op = self.net.switches[ms.idx()].ms_op_time.unwrap_or(0.0);
                        self.crews[ci].current = Some(Activity::Switch { ms, close: true });
                        self.crews[ci].busy_until = t + op;
                        changed = true;
                    }
                }
            }

            if !changed {
                break;
            }
        }
    }

    /// One crew's activity completes.
    fn finish_activity(&mut self, ci: usize) -> Result<(), SimError> {
        let t = self.now();
        let activity = self.crews[ci].current.take().expect("crew was busy");
        match activity {
            Activity::Travel { to } => {
                self.crews[ci].at = to;
                self.state.crews[ci].at = to;
                self.timeline.push(
                    t,
                    EventKind::TravelEnd {
                        crew: self.crew_id(ci),
                        loc: self.net.travel.point_ids[to.idx()].clone(),
                    },
                );
            }
            Activity::Patrol { pz, opens } => {
                let discoveries = self
                    .state
                    .reveal_zone(self.net, pz, self.truth)
                    .map_err(|e| SimError::Abort(e.to_string()))?;
                self.timeline.push(
                    t,
                    EventKind::PatrolDone {
                        crew: self.crew_id(ci),
                        patrol_zone: self.net.patrol_zones[pz.idx()].id.clone(),
                    },
                );
                for d in &discoveries {
                    if let Discovery::FaultFound { fault } = d {
                        let f = &self.state.faults[*fault];
                        self.timeline.push(
                            t,
                            EventKind::FaultRevealed {
                                fault: f.id.clone(),
                                zone: self.net.zones[f.zones[0].idx()].id.clone(),
                                repair_min: f.repair_time,
                            },
                        );
                    }
                }
                for ms in opens {
                    if self.state.switch_closed[ms.idx()] && self.state.ms_ops_done[ms.idx()] < 2 {
                        self.state.switch_closed[ms.idx()] = false;
                        self.state.ms_ops_done[ms.idx()] += 1;
                        self.timeline.push(
                            t,
                            EventKind::SwitchOp {
                                crew: Some(self.crew_id(ci)),
                                switch: self.net.switches[ms.idx()].id.clone(),
                                closed: false,
                            },
                        );
                    }
                }
                self.schedule_responsive(t);
            }
            Activity::Repair { fault } => {
                let f = &mut self.state.faults[fault];
                f.work_done = f.repair_time;
                f.status = FaultStatus::Repaired;
                let fid = f.id.clone();
                self.timeline.push(
                    t,
                    EventKind::RepairDone {
                        crew: self.crew_id(ci),
                        fault: fid,
                    },
                );
            }
            Activity::Switch { ms, close } => {
                self.state.switch_closed[ms.idx()] = close;
                self.state.ms_ops_done[ms.idx()] += 1;
                self.timeline.push(
                    t,
                    EventKind::SwitchOp {
                        crew: Some(self.crew_id(ci)),
                        switch: self.net.switches[ms.idx()].id.clone(),
                        closed: close,
                    },
                );
            }
            Activity::WaitClose { .. } => unreachable!("waiting crews are never due"),
        }
        self.propagate(t);
        if self.crews[ci].current.is_none() {
            self.start_next(ci)?;
        }
        Ok(())
    }

    fn schedule_responsive(&mut self, t: f64) {
        if !self.reopt_enabled {
            return;
        }
        let due = (self.last_reopt + self.policy.min_update).max(t);
        self.responsive_at = Some(match self.responsive_at {
            Some(prev) => prev.min(due),
            None => due,
        });
    }

    /// Advance the clock event by event until the stop condition, an
    /// abort, or the horizon.
    fn drive_until(&mut self, stop: impl Fn(&Engine) -> bool) -> Result<(), SimError> {
        loop {
            self.propagate(self.now());
            if stop(self) {
                return Ok(());
            }
            let next_crew = self
                .crews
                .iter()
                .enumerate()
                .filter(|(_, c)| c.current.is_some() && c.busy_until.is_finite())
                .map(|(ci, c)| (c.busy_until, ci))
                .min_by(|a, b| a.partial_cmp(b).unwrap());
            let next_reopt = if self.reopt_enabled {
                let proactive = self.last_reopt + self.policy.max_update;
                Some(self.responsive_at.map_or(proactive, |r| r.min(proactive)))
            } else {
                None
            };

            let crew_t = next_crew.map(|(t, _)| t).unwrap_or(f64::INFINITY);
            let reopt_t = next_reopt.unwrap_or(f64::INFINITY);
            if crew_t.is_infinite() && reopt_t.is_infinite() {
                self.timeline.push(
                    self.now(),
                    EventKind::Aborted {
                        reason: "no pending work but restoration incomplete".into(),
                    },
                );
                return Ok(());
            }
            let t = crew_t.min(reopt_t);
            if t > self.policy.horizon {
                self.timeline.push(
                    self.now(),
                    EventKind::Aborted {
                        reason: format!("horizon {} exceeded", self.policy.horizon),
                    },
                );
                return Ok(());
            }
            self.state.clock = t;
            if crew_t <= reopt_t {
                let (_, ci) = next_crew.expect("crew event due");
                self.finish_activity(ci)?;
            } else {
                let reason = if self.responsive_at.map_or(false, |r| r <= reopt_t + 1e-9) {
                    "discovery"
                } else {
                    "interval"
                };
                self.reoptimize(reason)?;
            }
        }
    }
}
