//! Constraint emitters: crew routing, action completion times, network
//! reconfiguration, zone restoration times, energization ordering, and
//! the objective. Power-flow rows live in `powerflow`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::milp::{
    LineStatusTerm, MilpModel, ModelConstants, PfSet, PfVars, Row, RowTag, Sense, VarCatalog,
    VarId,
};
use crate::net::{zone_adjacency, NetError, Network, SwitchKind};
use crate::scenario::{OptimizationInput, PointKind, RootSource};
use crate::units::MIN_PER_HOUR;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfMode {
    /// One linear power-flow set per energization step.
    MultiStep,
    /// Conservative passive/active envelopes on the final configuration.
    TimeStepFree,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("variable name collision: {0}")]
    NameCollision(String),
    #[error("network inconsistency: {0}")]
    Net(#[from] NetError),
    #[error("zone {zone}: missing or invalid outage cost rate")]
    MissingCostRate { zone: String },
    #[error("{0}")]
    Input(String),
}

/// Crew/task classes used to forbid cross-role arcs under a role split.
#[derive(Clone, Copy, PartialEq, Eq)]
enum PointClass {
    PatrolSide,
    RepairSide,
    Origin(bool), // true = patrol crew
}

pub(crate) struct Builder<'a> {
    pub net: &'a Network,
    pub input: &'a OptimizationInput,
    pub model: MilpModel,
    adjacency: BTreeMap<(usize, usize), (Vec<usize>, Vec<usize>)>, // pair -> (ms entry idx, rcs entry idx)
}

impl<'a> Builder<'a> {
    fn row(
        &mut self,
        name: String,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
        tag: RowTag,
    ) {
        self.model.push_row(Row {
            name,
            terms,
            sense,
            rhs,
            tag,
            relaxed_when: Vec::new(),
        });
    }

    fn row_relaxed(
        &mut self,
        name: String,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
        tag: RowTag,
        relaxed_when: Vec<(VarId, f64)>,
    ) {
        self.model.push_row(Row {
            name,
            terms,
            sense,
            rhs,
            tag,
            relaxed_when,
        });
    }

    fn visit(&self, p: usize) -> VarId {
        self.model.catalog.visit[p]
    }

    fn finish(&self, p: usize) -> VarId {
        self.model.catalog.finish[p]
    }

    fn outage(&self, z: usize) -> VarId {
        self.model.catalog.outage[z]
    }

    fn op_time(&self, p: usize) -> f64 {
        match &self.input.points[p].kind {
            PointKind::CrewOrigin { .. } => 0.0,
            PointKind::FaultTask { op_time, .. } => *op_time,
            PointKind::MsFirst { op_time, .. } | PointKind::MsSecond { op_time, .. } => *op_time,
        }
    }

    fn point_class(&self, p: usize) -> PointClass {
        match &self.input.points[p].kind {
            PointKind::CrewOrigin { crew, .. } => PointClass::Origin(
                self.input
                    .role_split
                    .as_ref()
                    .map(|rs| rs.patrol_crews.contains(crew))
                    .unwrap_or(false),
            ),
            PointKind::FaultTask { patrol_zone, .. } => {
                if patrol_zone.is_some() {
                    PointClass::PatrolSide
                } else {
                    PointClass::RepairSide
                }
            }
            PointKind::MsFirst { .. } | PointKind::MsSecond { .. } => PointClass::RepairSide,
        }
    }

    /// Arc admissibility: never into crew origins, never a self loop, and
    /// never across role classes when a role split is active.
    fn arc_allowed(&self, from: usize, to: usize) -> bool {
        if from == to {
            return false;
        }
        if matches!(self.input.points[to].kind, PointKind::CrewOrigin { .. }) {
            return false;
        }
        if self.input.role_split.is_some() {
            let side = |class: PointClass| match class {
                PointClass::PatrolSide | PointClass::Origin(true) => 0u8,
                PointClass::RepairSide | PointClass::Origin(false) => 1u8,
            };
            if side(self.point_class(from)) != side(self.point_class(to)) {
                return false;
            }
        }
        true
    }
}

fn horizon_constants(input: &OptimizationInput) -> ModelConstants {
    ModelConstants {
        horizon: input.horizon,
        bt: 2.0 * input.horizon,
        t_max: input.horizon,
    }
}

/// Assemble the full model for the chosen power-flow treatment.
pub fn assemble(
    net: &Network,
    input: &OptimizationInput,
    mode: PfMode,
) -> Result<MilpModel, BuildError> {
    assemble_with(net, input, mode, true)
}

/// `anti_cycle = false` drops the cycle-exclusion strengthening rows in
/// time-step-free mode for fidelity experiments.
pub fn assemble_with(
    net: &Network,
    input: &OptimizationInput,
    mode: PfMode,
    anti_cycle: bool,
) -> Result<MilpModel, BuildError> {
    check_input(net, input)?;
    let mut b = init_builder(net, input, mode)?;

    build_objective(&mut b)?;
    add_crew_routing(&mut b)?;
    add_action_times(&mut b)?;
    add_reconfiguration(&mut b)?;
    add_zone_restoration_times(&mut b)?;
    add_ordering_constraints(&mut b, mode)?;
    match mode {
        PfMode::MultiStep => super::powerflow::add_multistep(&mut b)?,
        PfMode::TimeStepFree => {
            super::powerflow::add_conservative(&mut b)?;
            if anti_cycle {
                add_anti_cycle(&mut b);
            }
        }
    }
    Ok(b.model)
}

fn check_input(net: &Network, input: &OptimizationInput) -> Result<(), BuildError> {
    if input.zones.len() != net.zones.len() {
        return Err(BuildError::Input(
            "snapshot zone table does not cover the network".into(),
        ));
    }
    for (zi, z) in input.zones.iter().enumerate() {
        if z.zone.idx() != zi {
            return Err(BuildError::Input("snapshot zone table out of order".into()));
        }
        if !z.cost_rate.is_finite() || z.cost_rate < 0.0 {
            return Err(BuildError::MissingCostRate {
                zone: net.zones[zi].id.clone(),
            });
        }
        if z.energized_at.is_none() {
            continue;
        }
        // An energized zone can no longer be blocked by a fault task.
        for &p in &input.fault_tasks {
            if let PointKind::FaultTask { zones, .. } = &input.points[p].kind {
                if zones.iter().any(|bz| bz.idx() == zi) {
                    return Err(BuildError::Input(format!(
                        "fault task {} blocks already-energized zone {}",
                        input.points[p].name, net.zones[zi].id
                    )));
                }
            }
        }
    }
    if !(net.v_min_sq <= 1.0 && 1.0 <= net.v_max_sq) {
        return Err(BuildError::Input(
            "squared voltage bounds must straddle the 1.0 pu reference".into(),
        ));
    }
    Ok(())
}

/// Create every variable family in catalog order.
fn init_builder<'a>(
    net: &'a Network,
    input: &'a OptimizationInput,
    mode: PfMode,
) -> Result<Builder<'a>, BuildError> {
    let constants = horizon_constants(input);
    let np = input.points.len();
    let nz = input.zones.len();

    // Adjacent zone pairs with their boundary switches, as entry indices.
    let adj = zone_adjacency(net)?;
    let ms_entry_of = |sw: crate::net::SwitchIdx| {
        input
            .ms_entries
            .iter()
            .position(|e| e.ms == sw)
            .expect("ms entry present for every MS")
    };
    let rcs_entry_of = |sw: crate::net::SwitchIdx| {
        input
            .rcs_entries
            .iter()
            .position(|e| e.rcs == sw)
            .expect("rcs entry present for every RCS")
    };
    let mut adjacency = BTreeMap::new();
    for ((za, zb), bs) in &adj {
        adjacency.insert(
            (za.idx(), zb.idx()),
            (
                bs.ms.iter().map(|s| ms_entry_of(*s)).collect::<Vec<_>>(),
                bs.rcs.iter().map(|s| rcs_entry_of(*s)).collect::<Vec<_>>(),
            ),
        );
    }

    let empty_catalog = VarCatalog {
        route: Vec::new(),
        visit: Vec::new(),
        patrol_open: Vec::new(),
        zone_parent: BTreeMap::new(),
        ms_final: Vec::new(),
        rcs_final: Vec::new(),
        line_final: Vec::new(),
        root: Vec::new(),
        master_dg: BTreeMap::new(),
        earlier: BTreeMap::new(),
        step_energized: Vec::new(),
        outage: Vec::new(),
        finish: Vec::new(),
        pf: PfVars::Conservative {
            passive: PfSet::default(),
            active: PfSet::default(),
        },
    };
    let mut b = Builder {
        net,
        input,
        model: MilpModel::new(constants, empty_catalog),
        adjacency,
    };

    // Route arcs.
    let mut route = vec![vec![None; np]; np];
    for p in 0..np {
        for q in 0..np {
            if b.arc_allowed(p, q) {
                let name = format!("rt.{}.{}", input.points[p].name, input.points[q].name);
                route[p][q] = Some(b.model.binary(name)?);
            }
        }
    }
    b.model.catalog.route = route;

    // Visits: crews and fault tasks are serviced by definition.
    let mut visit = Vec::with_capacity(np);
    for p in 0..np {
        let name = format!("v.{}", input.points[p].name);
        let fixed = matches!(
            input.points[p].kind,
            PointKind::CrewOrigin { .. } | PointKind::FaultTask { .. }
        );
        visit.push(if fixed {
            b.model.fixed_binary(name, true)?
        } else {
            b.model.binary(name)?
        });
    }
    b.model.catalog.visit = visit;

    // During-patrol openings.
    let mut patrol_open = Vec::new();
    for e in &input.ms_entries {
        patrol_open.push(match e.patrol_open_task {
            Some(_) => Some(
                b.model
                    .binary(format!("msp.{}", net.switches[e.ms.idx()].id))?,
            ),
            None => None,
        });
    }
    b.model.catalog.patrol_open = patrol_open;

    // Parent links over adjacent pairs, both orientations. Pins fix the
    // realized link and, through the supply row, exclude the rest.
    let pairs: Vec<(usize, usize)> = b.adjacency.keys().copied().collect();
    for (za, zb) in &pairs {
        for (parent, child) in [(*za, *zb), (*zb, *za)] {
            let name = format!(
                "zz.{}.{}",
                net.zones[parent].id, net.zones[child].id
            );
            let pinned = input.zones[child].pinned_parent.map(|p| p.idx() == parent);
            let var = match pinned {
                Some(true) => b.model.fixed_binary(name, true)?,
                _ if input.zones[child].energized_at.is_some() => {
                    // Energized with a different realized supply: excluded.
                    b.model.fixed_binary(name, false)?
                }
                _ => b.model.binary(name)?,
            };
            b.model.catalog.zone_parent.insert((parent, child), var);
        }
    }
    for (zi, z) in input.zones.iter().enumerate() {
        if let Some(parent) = z.pinned_parent {
            if !b.model.catalog.zone_parent.contains_key(&(parent.idx(), zi)) {
                return Err(BuildError::Input(format!(
                    "pinned supply {} -> {} is not a zone boundary",
                    net.zones[parent.idx()].id, net.zones[zi].id
                )));
            }
        }
    }

    // MS final status: defined by the operation pattern, or a constant
    // when no operations remain.
    let mut ms_final = Vec::new();
    for e in &input.ms_entries {
        let id = &net.switches[e.ms.idx()].id;
        if e.first_point.is_none() && e.second_point.is_none() {
            ms_final.push(LineStatusTerm::Fixed(if e.closed_now { 1.0 } else { 0.0 }));
        } else {
            ms_final.push(LineStatusTerm::Var(b.model.binary(format!("msf.{id}"))?));
        }
    }
    b.model.catalog.ms_final = ms_final;

    let mut rcs_final = Vec::new();
    for e in &input.rcs_entries {
        let id = &net.switches[e.rcs.idx()].id;
        let var = if e.pinned_closed {
            b.model.fixed_binary(format!("rcs.{id}"), true)?
        } else {
            b.model.binary(format!("rcs.{id}"))?
        };
        rcs_final.push(var);
    }
    b.model.catalog.rcs_final = rcs_final;

    // Line status aliases the owning switch's final status.
    let mut line_final = Vec::new();
    for line in &net.lines {
        let term = match line.switch {
            None => LineStatusTerm::Fixed(1.0),
            Some(sw) => match net.switches[sw.idx()].kind {
                SwitchKind::Ms => {
                    let e = input.ms_entries.iter().position(|e| e.ms == sw).unwrap();
                    b.model.catalog.ms_final[e]
                }
                SwitchKind::Rcs => {
                    let e = input.rcs_entries.iter().position(|e| e.rcs == sw).unwrap();
                    LineStatusTerm::Var(b.model.catalog.rcs_final[e])
                }
            },
        };
        line_final.push(term);
    }
    b.model.catalog.line_final = line_final;

    // Roots and master-DG designation.
    for z in 0..nz {
        let name = format!("root.{}", net.zones[z].id);
        let var = b.model.binary(name)?;
        b.model.catalog.root.push(var);
    }
    let mut dg_buses: Vec<usize> = net.dgs.iter().map(|d| d.bus.idx()).collect();
    dg_buses.sort_unstable();
    dg_buses.dedup();
    for bus in dg_buses {
        let pinned = input.zones.iter().any(|z| {
            matches!(z.pinned_root, Some(RootSource::MasterDg(bb)) if bb.idx() == bus)
        });
        let name = format!("mdg.{}", net.buses[bus].id);
        let var = if pinned {
            b.model.fixed_binary(name, true)?
        } else {
            b.model.binary(name)?
        };
        b.model.catalog.master_dg.insert(bus, var);
    }

    // Earlier-than indicators: all ordered pairs in multi-step mode,
    // adjacent pairs otherwise.
    match mode {
        PfMode::MultiStep => {
            for z in 0..nz {
                for w in 0..nz {
                    if z != w {
                        let name =
                            format!("zeta.{}.{}", net.zones[z].id, net.zones[w].id);
                        let var = b.model.binary(name)?;
                        b.model.catalog.earlier.insert((z, w), var);
                    }
                }
            }
        }
        PfMode::TimeStepFree => {
            for (za, zb) in &pairs {
                for (z, w) in [(*za, *zb), (*zb, *za)] {
                    let name = format!("zeta.{}.{}", net.zones[z].id, net.zones[w].id);
                    let var = b.model.binary(name)?;
                    b.model.catalog.earlier.insert((z, w), var);
                }
            }
        }
    }

    // Step-energized indicators, pinned to the realized order for zones
    // already back in service.
    if mode == PfMode::MultiStep {
        let mut done: Vec<(f64, usize)> = input
            .zones
            .iter()
            .enumerate()
            .filter_map(|(zi, z)| z.energized_at.map(|t| (t, zi)))
            .collect();
        done.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rank: BTreeMap<usize, usize> = done
            .iter()
            .enumerate()
            .map(|(i, (_, zi))| (*zi, i + 1))
            .collect();
        let mut step_energized = Vec::new();
        for z in 0..nz {
            let mut per_t = Vec::new();
            for t in 1..=nz {
                let name = format!("zt.{}.{t}", net.zones[z].id);
                let var = match rank.get(&z) {
                    Some(r) => b.model.fixed_binary(name, t >= *r)?,
                    None if t <= done.len() => b.model.fixed_binary(name, false)?,
                    None => b.model.binary(name)?,
                };
                per_t.push(var);
            }
            step_energized.push(per_t);
        }
        b.model.catalog.step_energized = step_energized;
    }

    // Outage times and action completion times.
    for (zi, z) in input.zones.iter().enumerate() {
        let name = format!("tout.{}", net.zones[zi].id);
        let var = match z.energized_at {
            Some(t) => b.model.continuous(name, t, t)?,
            None => b.model.continuous(name, z.not_before, input.horizon)?,
        };
        b.model.catalog.outage.push(var);
    }
    for p in 0..np {
        let name = format!("tau.{}", input.points[p].name);
        let var = match &input.points[p].kind {
            PointKind::CrewOrigin { available, .. } => {
                b.model.continuous(name, *available, *available)?
            }
            _ => b.model.continuous(name, 0.0, constants.bt)?,
        };
        b.model.catalog.finish.push(var);
    }

    Ok(b)
}

/// Outage cost plus travel cost, in dollars: minutes are converted to
/// hours for the $/hour travel rate and to kWh for the $/kWh energy rate.
fn build_objective(b: &mut Builder) -> Result<(), BuildError> {
    let mut objective = Vec::new();
    for (zi, z) in b.input.zones.iter().enumerate() {
        let coef = z.load_p * z.cost_rate / MIN_PER_HOUR;
        if coef != 0.0 {
            objective.push((b.outage(zi), coef));
        }
    }
    let rate = b.net.travel_cost_rate;
    for p in 0..b.input.points.len() {
        for q in 0..b.input.points.len() {
            if let Some(arc) = b.model.catalog.route[p][q] {
                let coef = b.input.travel[p][q] * rate / MIN_PER_HOUR;
                if coef != 0.0 {
                    objective.push((arc, coef));
                }
            }
        }
    }
    b.model.objective = objective;
    Ok(())
}

fn add_crew_routing(b: &mut Builder) -> Result<(), BuildError> {
    let np = b.input.points.len();

    // Out-degree at most the visit; in-degree equal to it away from the
    // crew origins.
    for p in 0..np {
        let mut out: Vec<(VarId, f64)> = (0..np)
            .filter_map(|q| b.model.catalog.route[p][q].map(|v| (v, 1.0)))
            .collect();
        out.push((b.visit(p), -1.0));
        b.row(
            format!("out.{}", b.input.points[p].name),
            out,
            Sense::Le,
            0.0,
            RowTag::RouteOutflow,
        );
        if !matches!(b.input.points[p].kind, PointKind::CrewOrigin { .. }) {
            let mut inn: Vec<(VarId, f64)> = (0..np)
                .filter_map(|q| b.model.catalog.route[q][p].map(|v| (v, 1.0)))
                .collect();
            inn.push((b.visit(p), -1.0));
            b.row(
                format!("in.{}", b.input.points[p].name),
                inn,
                Sense::Eq,
                0.0,
                RowTag::RouteInflow,
            );
        }
    }

    // Second switching needs the first one (directly or during patrol),
    // and a patrol-opened MS admits no direct first visit.
    for (e, entry) in b.input.ms_entries.iter().enumerate() {
        let (Some(p1), Some(p2)) = (entry.first_point, entry.second_point) else {
            continue;
        };
        let msp = b.model.catalog.patrol_open[e];
        let id = b.net.switches[entry.ms.idx()].id.clone();
        let mut gate = vec![(b.visit(p2), 1.0), (b.visit(p1), -1.0)];
        if let Some(m) = msp {
            gate.push((m, -1.0));
        }
        b.row(format!("sog.{id}"), gate, Sense::Le, 0.0, RowTag::SecondOpGate);
        if let Some(m) = msp {
            b.row(
                format!("foe.{id}"),
                vec![(m, 1.0), (b.visit(p1), 1.0)],
                Sense::Le,
                1.0,
                RowTag::FirstOpExclusive,
            );
        }
    }
    Ok(())
}

fn add_action_times(b: &mut Builder) -> Result<(), BuildError> {
    let np = b.input.points.len();
    let bt = b.model.constants.bt;

    // Completion chaining along chosen arcs.
    for p in 0..np {
        for q in 0..np {
            let Some(arc) = b.model.catalog.route[p][q] else {
                continue;
            };
            let delta = b.input.travel[p][q];
            let op = b.op_time(q);
            let m = bt + delta + op + 1.0;
            // tau_q >= tau_p + delta + op - M(1 - arc)
            b.row_relaxed(
                format!(
                    "chain.{}.{}",
                    b.input.points[p].name, b.input.points[q].name
                ),
                vec![(b.finish(q), 1.0), (b.finish(p), -1.0), (arc, -m)],
                Sense::Ge,
                delta + op - m,
                RowTag::ActionChain,
                vec![(arc, 0.0)],
            );
        }
    }

    for (e, entry) in b.input.ms_entries.iter().enumerate() {
        let id = b.net.switches[entry.ms.idx()].id.clone();
        // During-patrol opening completes no earlier than the patrol.
        if let (Some(msp), Some(p1), Some(task)) = (
            b.model.catalog.patrol_open[e],
            entry.first_point,
            entry.patrol_open_task,
        ) {
            let m = bt + 1.0;
            // tau_p1 >= tau_patrol - M(1 - msp)
            b.row_relaxed(
                format!("mspt.{id}"),
                vec![(b.finish(p1), 1.0), (b.finish(task), -1.0), (msp, -m)],
                Sense::Ge,
                -m,
                RowTag::PatrolOpenTime,
                vec![(msp, 0.0)],
            );
        }
        // Never-performed switchings take an out-of-scope completion time.
        if let Some(p2) = entry.second_point {
            b.row(
                format!("uso.{id}"),
                vec![(b.finish(p2), 1.0), (b.visit(p2), bt)],
                Sense::Ge,
                bt,
                RowTag::UnusedSecondOpTime,
            );
        }
        if let Some(p1) = entry.first_point {
            let mut terms = vec![(b.finish(p1), 1.0), (b.visit(p1), bt)];
            if let Some(msp) = b.model.catalog.patrol_open[e] {
                terms.push((msp, bt));
            }
            b.row(
                format!("ufo.{id}"),
                terms,
                Sense::Ge,
                bt,
                RowTag::UnusedFirstOpTime,
            );
        }
        if let (Some(p1), Some(p2)) = (entry.first_point, entry.second_point) {
            b.row(
                format!("saf.{id}"),
                vec![(b.finish(p2), 1.0), (b.finish(p1), -1.0)],
                Sense::Ge,
                0.0,
                RowTag::SecondAfterFirst,
            );
        }
    }
    Ok(())
}

fn add_reconfiguration(b: &mut Builder) -> Result<(), BuildError> {
    let nz = b.input.zones.len();

    // Reference zones hold a substation or a designated master DG.
    for z in 0..nz {
        let subs = b.net.zones[z]
            .buses
            .iter()
            .filter(|bus| b.net.buses[bus.idx()].is_substation)
            .count() as f64;
        let mut terms = vec![(b.model.catalog.root[z], 1.0)];
        for bus in &b.net.zones[z].buses {
            if let Some(mdg) = b.model.catalog.master_dg_var(*bus) {
                terms.push((mdg, -1.0));
            }
        }
        b.row(
            format!("rootdef.{}", b.net.zones[z].id),
            terms,
            Sense::Eq,
            subs,
            RowTag::RootDef,
        );
    }

    // Exactly one supply: a root, or one parent zone.
    for z in 0..nz {
        let mut terms = vec![(b.model.catalog.root[z], 1.0)];
        for ((_, child), var) in &b.model.catalog.zone_parent {
            if *child == z {
                terms.push((*var, 1.0));
            }
        }
        b.row(
            format!("supply.{}", b.net.zones[z].id),
            terms,
            Sense::Eq,
            1.0,
            RowTag::OneSupply,
        );
    }

    let pairs: Vec<((usize, usize), (Vec<usize>, Vec<usize>))> = b
        .adjacency
        .iter()
        .map(|(k, v)| (*k, v.clone()))
        .collect();
    for ((za, zb), (ms_list, rcs_list)) in &pairs {
        let ab = b.model.catalog.zone_parent[&(*za, *zb)];
        let ba = b.model.catalog.zone_parent[&(*zb, *za)];
        let pair_name = format!("{}.{}", b.net.zones[*za].id, b.net.zones[*zb].id);
        b.row(
            format!("nomutual.{pair_name}"),
            vec![(ab, 1.0), (ba, 1.0)],
            Sense::Le,
            1.0,
            RowTag::NoMutualParent,
        );

        // A parent link means exactly one closed switch on the boundary.
        let mut terms = vec![(ab, 1.0), (ba, 1.0)];
        let mut rhs = 0.0;
        for e in rcs_list {
            terms.push((b.model.catalog.rcs_final[*e], -1.0));
        }
        for e in ms_list {
            match b.model.catalog.ms_final[*e] {
                LineStatusTerm::Var(v) => terms.push((v, -1.0)),
                LineStatusTerm::Fixed(c) => rhs += c,
            }
        }
        b.row(
            format!("pairsw.{pair_name}"),
            terms,
            Sense::Eq,
            rhs,
            RowTag::PairSwitchMatch,
        );
    }

    // Final MS status from its operation pattern. With data standing in
    // for the current state, both branches stay linear.
    for (e, entry) in b.input.ms_entries.iter().enumerate() {
        let LineStatusTerm::Var(msf) = b.model.catalog.ms_final[e] else {
            continue;
        };
        let id = b.net.switches[entry.ms.idx()].id.clone();
        if entry.closed_now {
            // msf = 1 - v1 - msp + v2
            let p1 = entry.first_point.expect("closed MS with ops has both points");
            let p2 = entry.second_point.expect("closed MS with ops has both points");
            let mut terms = vec![
                (msf, 1.0),
                (b.visit(p1), 1.0),
                (b.visit(p2), -1.0),
            ];
            if let Some(msp) = b.model.catalog.patrol_open[e] {
                terms.push((msp, 1.0));
            }
            b.row(format!("msfdef.{id}"), terms, Sense::Eq, 1.0, RowTag::MsFinalStatus);
        } else {
            // msf = v1; second operation of an open switch is not a thing.
            let p1 = entry.first_point.expect("open MS with ops has a close point");
            b.row(
                format!("msfdef.{id}"),
                vec![(msf, 1.0), (b.visit(p1), -1.0)],
                Sense::Eq,
                0.0,
                RowTag::MsFinalStatus,
            );
        }
    }
    Ok(())
}

fn add_zone_restoration_times(b: &mut Builder) -> Result<(), BuildError> {
    let h = b.model.constants.horizon;
    let bt = b.model.constants.bt;
    let m_tt = h + 1.0;
    let m_tau = bt + 1.0;

    // Parent energized before child.
    let parents: Vec<((usize, usize), VarId)> = b
        .model
        .catalog
        .zone_parent
        .iter()
        .map(|(k, v)| (*k, *v))
        .collect();
    for ((parent, child), link) in &parents {
        // T_child >= T_parent - M(1 - link)
        b.row_relaxed(
            format!(
                "pbc.{}.{}",
                b.net.zones[*parent].id, b.net.zones[*child].id
            ),
            vec![
                (b.outage(*child), 1.0),
                (b.outage(*parent), -1.0),
                (*link, -m_tt),
            ],
            Sense::Ge,
            -m_tt,
            RowTag::ParentBeforeChild,
            vec![(*link, 0.0)],
        );
    }

    let entries: Vec<(usize, crate::scenario::MsEntry)> = b
        .input
        .ms_entries
        .iter()
        .cloned()
        .enumerate()
        .collect();
    for (e, entry) in &entries {
        let (za, zb) = b.net.switch_zones(entry.ms);
        let (za, zb) = (za.idx(), zb.idx());
        let id = b.net.switches[entry.ms.idx()].id.clone();
        let msp = b.model.catalog.patrol_open[*e];

        if entry.closed_now {
            if let Some(p1) = entry.first_point {
                // Opening an initially-closed MS gates both sides:
                // T_z >= tau_p1 - M(1 - v1 - msp)
                for z in [za, zb] {
                    let mut terms = vec![
                        (b.outage(z), 1.0),
                        (b.finish(p1), -1.0),
                        (b.visit(p1), -m_tau),
                    ];
                    let mut relaxed = vec![(b.visit(p1), 0.0)];
                    if let Some(m) = msp {
                        terms.push((m, -m_tau));
                        relaxed.push((m, 0.0));
                    }
                    b.row_relaxed(
                        format!("iso.{id}.{}", b.net.zones[z].id),
                        terms,
                        Sense::Ge,
                        -m_tau,
                        RowTag::IsolationGate,
                        relaxed,
                    );
                }
            }
            if let Some(p2) = entry.second_point {
                // Re-closing gates only the child of the pair.
                for (parent, child) in [(za, zb), (zb, za)] {
                    let link = b.model.catalog.zone_parent[&(parent, child)];
                    // T_child >= tau_p2 - M(2 - link - v2)
                    b.row_relaxed(
                        format!("reclose.{id}.{}", b.net.zones[child].id),
                        vec![
                            (b.outage(child), 1.0),
                            (b.finish(p2), -1.0),
                            (link, -m_tau),
                            (b.visit(p2), -m_tau),
                        ],
                        Sense::Ge,
                        -2.0 * m_tau,
                        RowTag::ReCloseGate,
                        vec![(b.visit(p2), 0.0)],
                    );
                }
            }
            // An untouched closed MS keeps both sides live together: the
            // parent cannot be energized strictly before the child.
            for (parent, child) in [(za, zb), (zb, za)] {
                let link = b.model.catalog.zone_parent[&(parent, child)];
                let mut terms = vec![
                    (b.outage(parent), 1.0),
                    (b.outage(child), -1.0),
                    (link, -m_tt),
                ];
                let relaxed = vec![(link, 0.0)];
                if let Some(p1) = entry.first_point {
                    terms.push((b.visit(p1), m_tt));
                }
                if let Some(m) = msp {
                    terms.push((m, m_tt));
                }
                // T_parent >= T_child - M(1 - link + v1 + msp)
                b.row_relaxed(
                    format!(
                        "couple.{id}.{}.{}",
                        b.net.zones[parent].id, b.net.zones[child].id
                    ),
                    terms,
                    Sense::Ge,
                    -m_tt,
                    RowTag::UntouchedMsCouple,
                    relaxed,
                );
            }
        } else if let Some(p1) = entry.first_point {
            // Closing a normally-open MS energizes the child at the
            // switching time.
            for (parent, child) in [(za, zb), (zb, za)] {
                let link = b.model.catalog.zone_parent[&(parent, child)];
                // T_child >= tau_p1 - M(2 - link - v1)
                b.row_relaxed(
                    format!("tieclose.{id}.{}", b.net.zones[child].id),
                    vec![
                        (b.outage(child), 1.0),
                        (b.finish(p1), -1.0),
                        (link, -m_tau),
                        (b.visit(p1), -m_tau),
                    ],
                    Sense::Ge,
                    -2.0 * m_tau,
                    RowTag::TieCloseGate,
                    vec![(b.visit(p1), 0.0)],
                );
            }
        }

        // The closing operation, when this switch supplies the child,
        // must wait for the child's restoration.
        let close_point = if entry.closed_now {
            entry.second_point
        } else {
            entry.first_point
        };
        if let Some(pc) = close_point {
            for (parent, child) in [(za, zb), (zb, za)] {
                let link = b.model.catalog.zone_parent[&(parent, child)];
                // tau_close >= T_child - M(1 - link)
                b.row_relaxed(
                    format!("closewait.{id}.{}", b.net.zones[child].id),
                    vec![
                        (b.finish(pc), 1.0),
                        (b.outage(child), -1.0),
                        (link, -m_tt),
                    ],
                    Sense::Ge,
                    -m_tt,
                    RowTag::CloseAfterChildRestore,
                    vec![(link, 0.0)],
                );
            }
        }
    }

    // A zone stays out until every fault in it is repaired.
    for &p in &b.input.fault_tasks {
        if let PointKind::FaultTask { zones, .. } = &b.input.points[p].kind {
            for z in zones.clone() {
                b.row(
                    format!("fblock.{}.{}", b.input.points[p].name, b.net.zones[z.idx()].id),
                    vec![(b.outage(z.idx()), 1.0), (b.finish(p), -1.0)],
                    Sense::Ge,
                    0.0,
                    RowTag::FaultBlocksZone,
                );
            }
        }
    }
    Ok(())
}

fn add_ordering_constraints(b: &mut Builder, mode: PfMode) -> Result<(), BuildError> {
    let t_max = b.model.constants.t_max;
    let nz = b.input.zones.len();

    // Later restoration time forces the earlier-than indicator.
    let earlier: Vec<((usize, usize), VarId)> = b
        .model
        .catalog
        .earlier
        .iter()
        .map(|(k, v)| (*k, *v))
        .collect();
    for ((z, w), zeta) in &earlier {
        // zeta >= (T_w - T_z)/T_max
        b.row(
            format!("earlier.{}.{}", b.net.zones[*z].id, b.net.zones[*w].id),
            vec![
                (*zeta, t_max),
                (b.outage(*w), -1.0),
                (b.outage(*z), 1.0),
            ],
            Sense::Ge,
            0.0,
            RowTag::EarlierFromTimes,
        );
    }

    if mode != PfMode::MultiStep {
        return Ok(());
    }
    let steps = &b.model.catalog.step_energized;
    if steps.is_empty() || steps.len() != nz {
        return Err(BuildError::Input(
            "multi-step mode needs one step per zone".into(),
        ));
    }
    let steps = steps.clone();

    // Exactly t zones energized by step t, monotonically.
    for t in 0..nz {
        let terms: Vec<(VarId, f64)> = (0..nz).map(|z| (steps[z][t], 1.0)).collect();
        b.row(
            format!("stepcount.{}", t + 1),
            terms,
            Sense::Eq,
            (t + 1) as f64,
            RowTag::StepCount,
        );
    }
    for z in 0..nz {
        for t in 1..nz {
            b.row(
                format!("stepmono.{}.{}", b.net.zones[z].id, t + 1),
                vec![(steps[z][t], 1.0), (steps[z][t - 1], -1.0)],
                Sense::Ge,
                0.0,
                RowTag::StepMonotone,
            );
        }
    }

    // Earlier zones and parents occupy strictly more steps.
    let m_steps = nz as f64 + 2.0;
    for ((z, w), zeta) in &earlier {
        let mut terms: Vec<(VarId, f64)> = Vec::with_capacity(2 * nz + 1);
        for t in 0..nz {
            terms.push((steps[*z][t], 1.0));
            terms.push((steps[*w][t], -1.0));
        }
        terms.push((*zeta, -m_steps));
        b.row_relaxed(
            format!("morestep.{}.{}", b.net.zones[*z].id, b.net.zones[*w].id),
            terms,
            Sense::Ge,
            1.0 - m_steps,
            RowTag::EarlierMoreSteps,
            vec![(*zeta, 0.0)],
        );
    }
    let parents: Vec<((usize, usize), VarId)> = b
        .model
        .catalog
        .zone_parent
        .iter()
        .map(|(k, v)| (*k, *v))
        .collect();
    for ((parent, child), link) in &parents {
        let mut terms: Vec<(VarId, f64)> = Vec::with_capacity(2 * nz + 1);
        for t in 0..nz {
            terms.push((steps[*parent][t], 1.0));
            terms.push((steps[*child][t], -1.0));
        }
        terms.push((*link, -m_steps));
        b.row_relaxed(
            format!(
                "parentstep.{}.{}",
                b.net.zones[*parent].id, b.net.zones[*child].id
            ),
            terms,
            Sense::Ge,
            1.0 - m_steps,
            RowTag::ParentMoreSteps,
            vec![(*link, 0.0)],
        );
    }
    Ok(())
}

/// Cycle exclusion for the time-step-free formulation: a parent must not
/// be energized later than its child, and the earlier-than relation is
/// antisymmetric.
fn add_anti_cycle(b: &mut Builder) {
    let parents: Vec<((usize, usize), VarId)> = b
        .model
        .catalog
        .zone_parent
        .iter()
        .map(|(k, v)| (*k, *v))
        .collect();
    for ((parent, child), link) in &parents {
        let zeta = b.model.catalog.earlier[&(*parent, *child)];
        b.row(
            format!(
                "pne.{}.{}",
                b.net.zones[*parent].id, b.net.zones[*child].id
            ),
            vec![(*link, 1.0), (zeta, -1.0)],
            Sense::Le,
            0.0,
            RowTag::ParentNeedsEarlier,
        );
    }
    let pairs: Vec<(usize, usize)> = b.adjacency.keys().copied().collect();
    for (za, zb) in &pairs {
        let fwd = b.model.catalog.earlier[&(*za, *zb)];
        let bwd = b.model.catalog.earlier[&(*zb, *za)];
        b.row(
            format!("easym.{}.{}", b.net.zones[*za].id, b.net.zones[*zb].id),
            vec![(fwd, 1.0), (bwd, 1.0)],
            Sense::Le,
            1.0,
            RowTag::EarlierAsymmetry,
        );
    }
}

/// Patrol-only makespan model used by the patrol-first baseline: route
/// crews through every unpatrolled area, minimizing the latest patrol
/// completion with travel cost as a tie-breaker. Returns the reduced
/// snapshot alongside the model so routes can be read back.
pub fn build_patrol_makespan(
    net: &Network,
    input: &OptimizationInput,
) -> Result<(MilpModel, OptimizationInput), BuildError> {
    let keep: Vec<usize> = (0..input.points.len())
        .filter(|p| {
            matches!(
                &input.points[*p].kind,
                PointKind::CrewOrigin { .. }
                    | PointKind::FaultTask {
                        patrol_zone: Some(_),
                        ..
                    }
            )
        })
        .collect();
    let mut sub_points = Vec::new();
    let mut sub_travel = vec![vec![0.0; keep.len()]; keep.len()];
    for (i, p) in keep.iter().enumerate() {
        sub_points.push(input.points[*p].clone());
        for (j, q) in keep.iter().enumerate() {
            sub_travel[i][j] = input.travel[*p][*q];
        }
    }
    let sub = OptimizationInput {
        now: input.now,
        horizon: input.horizon,
        crew_origins: sub_points
            .iter()
            .enumerate()
            .filter(|(_, tp)| matches!(tp.kind, PointKind::CrewOrigin { .. }))
            .map(|(i, _)| i)
            .collect(),
        fault_tasks: sub_points
            .iter()
            .enumerate()
            .filter(|(_, tp)| matches!(tp.kind, PointKind::FaultTask { .. }))
            .map(|(i, _)| i)
            .collect(),
        points: sub_points,
        ms_entries: Vec::new(),
        rcs_entries: Vec::new(),
        zones: Vec::new(),
        travel: sub_travel,
        role_split: None,
    };

    let constants = horizon_constants(&sub);
    let empty_catalog = VarCatalog {
        route: Vec::new(),
        visit: Vec::new(),
        patrol_open: Vec::new(),
        zone_parent: BTreeMap::new(),
        ms_final: Vec::new(),
        rcs_final: Vec::new(),
        line_final: Vec::new(),
        root: Vec::new(),
        master_dg: BTreeMap::new(),
        earlier: BTreeMap::new(),
        step_energized: Vec::new(),
        outage: Vec::new(),
        finish: Vec::new(),
        pf: PfVars::Conservative {
            passive: PfSet::default(),
            active: PfSet::default(),
        },
    };
    let mut b = Builder {
        net,
        input: &sub,
        model: MilpModel::new(constants, empty_catalog),
        adjacency: BTreeMap::new(),
    };

    let np = sub.points.len();
    let mut route = vec![vec![None; np]; np];
    for p in 0..np {
        for q in 0..np {
            if b.arc_allowed(p, q) {
                let name = format!("rt.{}.{}", sub.points[p].name, sub.points[q].name);
                route[p][q] = Some(b.model.binary(name)?);
            }
        }
    }
    b.model.catalog.route = route;
    for p in 0..np {
        let v = b.model.fixed_binary(format!("v.{}", sub.points[p].name), true)?;
        b.model.catalog.visit.push(v);
    }
    for p in 0..np {
        let name = format!("tau.{}", sub.points[p].name);
        let var = match &sub.points[p].kind {
            PointKind::CrewOrigin { available, .. } => {
                b.model.continuous(name, *available, *available)?
            }
            _ => b.model.continuous(name, 0.0, constants.bt)?,
        };
        b.model.catalog.finish.push(var);
    }
    let makespan = b
        .model
        .continuous("makespan".into(), 0.0, constants.bt)?;

    add_crew_routing(&mut b)?;
    add_action_times(&mut b)?;
    for (i, tp) in sub.points.iter().enumerate() {
        if matches!(tp.kind, PointKind::FaultTask { .. }) {
            b.row(
                format!("span.{}", tp.name),
                vec![(makespan, 1.0), (b.model.catalog.finish[i], -1.0)],
                Sense::Ge,
                0.0,
                RowTag::MakespanBound,
            );
        }
    }

    // Makespan dominates; travel cost breaks ties.
    let mut objective = vec![(makespan, 1000.0)];
    for p in 0..np {
        for q in 0..np {
            if let Some(arc) = b.model.catalog.route[p][q] {
                let coef = sub.travel[p][q] * net.travel_cost_rate / MIN_PER_HOUR;
                if coef != 0.0 {
                    objective.push((arc, coef));
                }
            }
        }
    }
    b.model.objective = objective;
    let model = b.model;
    Ok((model, sub))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Family;
    use crate::scenario::{snapshot_for_optimization, ScenarioState};
    use crate::synth;

    fn fresh_snapshot(
        net: &Network,
        seed: u64,
        faults: usize,
    ) -> crate::scenario::OptimizationInput {
        let truth = synth::seeded_scenario(net, seed, faults);
        let state = ScenarioState::post_event(net, &truth);
        snapshot_for_optimization(&state, net, 1440.0)
    }

    #[test]
    fn route_var_count_matches_set_sizes() {
        let net = synth::two_zone_net();
        let input = fresh_snapshot(&net, 1, 1);
        let model = assemble(&net, &input, PfMode::TimeStepFree).unwrap();
        let np = input.points.len();
        let nc = input.crew_origins.len();
        let expected = np * np - nc * np - (np - nc);
        let count: usize = model
            .catalog
            .route
            .iter()
            .flatten()
            .filter(|v| v.is_some())
            .count();
        assert_eq!(count, expected);
        // No self loops anywhere.
        for p in 0..np {
            assert!(model.catalog.route[p][p].is_none());
        }
        // Fault visits pinned to one.
        for &p in &input.fault_tasks {
            let v = model.var(model.catalog.visit[p]);
            assert_eq!((v.lb, v.ub), (1.0, 1.0));
        }
    }

    #[test]
    fn family_shape_per_mode() {
        let net = synth::desk13_net();
        let input = fresh_snapshot(&net, 2, 6);

        let tsf = assemble(&net, &input, PfMode::TimeStepFree).unwrap();
        let fams = tsf.families();
        use Family::*;
        for f in [
            Routing,
            ActionTimes,
            Reconfig,
            RestorationTimes,
            Ordering,
            PassivePf,
            ActivePf,
            AntiCycle,
            RootRef,
        ] {
            assert!(fams.contains(&f), "missing {f:?}");
        }
        assert!(!fams.contains(&StepPf));
        // Ordering carries only the time-derived indicator rows here.
        assert!(tsf
            .rows
            .iter()
            .filter(|r| r.tag.family() == Ordering)
            .all(|r| r.tag == RowTag::EarlierFromTimes));

        let ms = assemble(&net, &input, PfMode::MultiStep).unwrap();
        let fams = ms.families();
        for f in [Routing, ActionTimes, Reconfig, RestorationTimes, Ordering, StepPf, RootRef] {
            assert!(fams.contains(&f), "missing {f:?}");
        }
        for f in [PassivePf, ActivePf, AntiCycle] {
            assert!(!fams.contains(&f), "unexpected {f:?}");
        }
        let tags: std::collections::BTreeSet<RowTag> =
            ms.rows.iter().map(|r| r.tag).collect();
        for t in [
            RowTag::StepCount,
            RowTag::StepMonotone,
            RowTag::EarlierMoreSteps,
            RowTag::ParentMoreSteps,
        ] {
            assert!(tags.contains(&t), "missing {t:?}");
        }
    }

    #[test]
    fn big_m_certificates_hold() {
        let net = synth::desk13_net();
        let input = fresh_snapshot(&net, 3, 8);
        for mode in [PfMode::TimeStepFree, PfMode::MultiStep] {
            let model = assemble(&net, &input, mode).unwrap();
            let bad = model.check_big_m_sufficiency();
            assert!(bad.is_empty(), "{mode:?}: {bad:?}");
            let dup = model.check_no_duplicate_terms();
            assert!(dup.is_empty(), "{mode:?}: {dup:?}");
        }
    }

    #[test]
    fn every_row_is_tagged_and_named_uniquely() {
        let net = synth::desk13_net();
        let input = fresh_snapshot(&net, 4, 5);
        let model = assemble(&net, &input, PfMode::TimeStepFree).unwrap();
        let mut names = std::collections::HashSet::new();
        for r in &model.rows {
            assert!(names.insert(r.name.clone()), "duplicate row {}", r.name);
        }
        let mut vnames = std::collections::HashSet::new();
        for v in &model.vars {
            assert!(vnames.insert(v.name.clone()), "duplicate var {}", v.name);
        }
    }

    #[test]
    fn catalog_houses_every_variable_family() {
        // Static symbol-housing table: each decision family must be
        // populated on a representative snapshot (multi-step mode so the
        // step indicators exist too).
        let net = synth::desk13_net();
        let input = fresh_snapshot(&net, 5, 6);
        let model = assemble(&net, &input, PfMode::MultiStep).unwrap();
        let c = &model.catalog;
        assert!(c.route.iter().flatten().any(|v| v.is_some())); // crew arcs
        assert!(!c.visit.is_empty()); // visit flags
        assert!(c.patrol_open.iter().any(|v| v.is_some())); // during-patrol openings
        assert!(!c.zone_parent.is_empty()); // parent links
        assert!(!c.ms_final.is_empty()); // MS final status
        assert!(!c.rcs_final.is_empty()); // RCS final status
        assert!(!c.line_final.is_empty()); // line status terms
        assert!(!c.root.is_empty()); // reference zones
        assert!(!c.master_dg.is_empty()); // master DG designation
        assert!(!c.earlier.is_empty()); // earlier-than indicators
        assert!(!c.step_energized.is_empty()); // step indicators
        assert!(!c.outage.is_empty()); // outage durations
        assert!(!c.finish.is_empty()); // action completion times
        match &c.pf {
            PfVars::MultiStep { steps } => assert_eq!(steps.len(), net.zones.len()),
            _ => panic!("expected per-step power flow variables"),
        }
    }

    #[test]
    fn objective_units() {
        // One zone out for a forced two hours at 100 kW and $20/kWh plus
        // one 30-minute arc at $0.60/h.
        let net = synth::single_zone_net();
        let input = fresh_snapshot(&net, 6, 0);
        let model = assemble(&net, &input, PfMode::TimeStepFree).unwrap();
        let mut values = vec![0.0; model.n_vars()];
        values[model.catalog.outage[0].0] = 120.0;
        let obj = model.objective_at(&values);
        assert!((obj - 120.0 / 60.0 * 120.0 * 20.0).abs() < 1e-9);

        // Travel coefficient of a single arc: delta * rate / 60.
        let (p, q, arc) = (0..input.points.len())
            .flat_map(|p| (0..input.points.len()).map(move |q| (p, q)))
            .find_map(|(p, q)| model.catalog.route[p][q].map(|a| (p, q, a)))
            .unwrap();
        let coef = model
            .objective
            .iter()
            .find(|(v, _)| *v == arc)
            .map(|(_, c)| *c)
            .unwrap_or(0.0);
        assert!((coef - input.travel[p][q] * 0.6 / 60.0).abs() < 1e-12);
    }
}
