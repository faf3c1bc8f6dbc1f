//! Solver-agnostic MILP representation: a variable catalog covering every
//! decision family, linear rows carrying machine-checkable tags, and the
//! objective. Building is a pure function of the snapshot; models can be
//! built and solved concurrently.

mod builder;
mod powerflow;

pub use builder::{assemble, build_patrol_makespan, BuildError, PfMode};

use std::collections::BTreeMap;
use std::collections::HashMap;

use crate::net::{BusIdx, LineIdx};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone)]
pub struct VarDef {
    pub name: String,
    pub integer: bool,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// What a row does, grouped into the families a formulation is allowed to
/// contain. Tests assert family sets per mode and that every row carries
/// a tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowTag {
    // crew routing
    RouteOutflow,
    RouteInflow,
    SecondOpGate,
    FirstOpExclusive,
    // action completion times
    ActionChain,
    PatrolOpenTime,
    UnusedSecondOpTime,
    UnusedFirstOpTime,
    SecondAfterFirst,
    // reconfiguration
    RootDef,
    OneSupply,
    NoMutualParent,
    PairSwitchMatch,
    MsFinalStatus,
    // zone restoration times
    ParentBeforeChild,
    IsolationGate,
    ReCloseGate,
    TieCloseGate,
    UntouchedMsCouple,
    FaultBlocksZone,
    CloseAfterChildRestore,
    // energization ordering
    EarlierFromTimes,
    StepCount,
    StepMonotone,
    EarlierMoreSteps,
    ParentMoreSteps,
    // per-step power flow
    StepVoltDrop,
    StepBalance,
    StepGenGate,
    StepFlowGate,
    // passive-loading envelope
    PassiveVoltDrop,
    PassiveBalance,
    PassiveGenCap,
    PassiveDownstreamFlow,
    PassiveFlowGate,
    // active-loading envelope
    ActiveVoltDrop,
    ActiveBalance,
    ActiveGenFloor,
    ActiveDominatesPassive,
    ActiveUpstreamFlow,
    ActiveFlowGate,
    // cycle exclusion strengthening (separately tagged so it can be
    // switched off for fidelity experiments)
    ParentNeedsEarlier,
    EarlierAsymmetry,
    // island reference voltage
    RootVoltageRef,
    // baseline-only rows
    MakespanBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Family {
    Routing,
    ActionTimes,
    Reconfig,
    RestorationTimes,
    Ordering,
    StepPf,
    PassivePf,
    ActivePf,
    AntiCycle,
    RootRef,
    Baseline,
}

impl RowTag {
    pub fn family(self) -> Family {
        use RowTag::*;
        match self {
            RouteOutflow | RouteInflow | SecondOpGate | FirstOpExclusive => Family::Routing,
            ActionChain | PatrolOpenTime | UnusedSecondOpTime | UnusedFirstOpTime
            | SecondAfterFirst => Family::ActionTimes,
            RootDef | OneSupply | NoMutualParent | PairSwitchMatch | MsFinalStatus => {
                Family::Reconfig
            }
            ParentBeforeChild | IsolationGate | ReCloseGate | TieCloseGate | UntouchedMsCouple
            | FaultBlocksZone | CloseAfterChildRestore => Family::RestorationTimes,
            EarlierFromTimes | StepCount | StepMonotone | EarlierMoreSteps | ParentMoreSteps => {
                Family::Ordering
            }
            StepVoltDrop | StepBalance | StepGenGate | StepFlowGate => Family::StepPf,
            PassiveVoltDrop | PassiveBalance | PassiveGenCap | PassiveDownstreamFlow
            | PassiveFlowGate => Family::PassivePf,
            ActiveVoltDrop | ActiveBalance | ActiveGenFloor | ActiveDominatesPassive
            | ActiveUpstreamFlow | ActiveFlowGate => Family::ActivePf,
            ParentNeedsEarlier | EarlierAsymmetry => Family::AntiCycle,
            RootVoltageRef => Family::RootRef,
            MakespanBound => Family::Baseline,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: RowTag,
    /// For big-M rows: variable assignments under which the row must
    /// hold for every point of the variable box. Interval arithmetic
    /// over these assignments certifies the M is large enough.
    pub relaxed_when: Vec<(VarId, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub struct ModelConstants {
    /// Planning horizon, minutes from the event.
    pub horizon: f64,
    /// Out-of-scope time marking switchings that never happen.
    pub bt: f64,
    /// Denominator of the earlier-than indicator rows.
    pub t_max: f64,
}

/// One power-flow variable set: squared voltages per bus, per-component
/// line flows, generation at the buses that may inject.
#[derive(Debug, Clone, Default)]
pub struct PfSet {
    pub u: Vec<VarId>,
    pub flow_p: Vec<VarId>,
    pub flow_q: Vec<VarId>,
    pub gen_p: Vec<Option<VarId>>,
    pub gen_q: Vec<Option<VarId>>,
}

#[derive(Debug, Clone)]
pub enum PfVars {
    /// One set per energization step.
    MultiStep { steps: Vec<PfSet> },
    /// Passive (lower envelope) and active (upper envelope) sets on the
    /// final configuration.
    Conservative { passive: PfSet, active: PfSet },
}

/// Every decision family of the formulation, indexed the way the
/// snapshot lays out points, zones and switches.
#[derive(Debug, Clone)]
pub struct VarCatalog {
    /// route[p][p'] — arc traversed by a crew; forbidden arcs hold None.
    pub route: Vec<Vec<Option<VarId>>>,
    /// visit[p] — some crew services point p.
    pub visit: Vec<VarId>,
    /// During-patrol opening per MS entry, present when available.
    pub patrol_open: Vec<Option<VarId>>,
    /// zone_parent[(parent, child)] over adjacent zone pairs.
    pub zone_parent: BTreeMap<(usize, usize), VarId>,
    /// Final closed status per MS entry; a constant when no operations
    /// remain available.
    pub ms_final: Vec<LineStatusTerm>,
    /// Final closed status per RCS entry.
    pub rcs_final: Vec<VarId>,
    /// Final connection status per line: the switch's final-status term,
    /// or fixed 1 for unswitched lines.
    pub line_final: Vec<LineStatusTerm>,
    /// Reference-zone indicator per zone.
    pub root: Vec<VarId>,
    /// Master-DG indicator per DG bus.
    pub master_dg: BTreeMap<usize, VarId>,
    /// earlier[(z, z')] — z energized before z'.
    pub earlier: BTreeMap<(usize, usize), VarId>,
    /// step_energized[z][t] in multi-step mode.
    pub step_energized: Vec<Vec<VarId>>,
    /// Outage duration per zone, minutes.
    pub outage: Vec<VarId>,
    /// Completion time per routing point, minutes.
    pub finish: Vec<VarId>,
    pub pf: PfVars,
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub vars: Vec<VarDef>,
    pub rows: Vec<Row>,
    /// Minimized linear objective plus a constant offset (dollars).
    pub objective: Vec<(VarId, f64)>,
    pub objective_offset: f64,
    pub constants: ModelConstants,
    pub catalog: VarCatalog,
    names: HashMap<String, VarId>,
}

impl MilpModel {
    pub(crate) fn new(constants: ModelConstants, catalog: VarCatalog) -> Self {
        MilpModel {
            vars: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            objective_offset: 0.0,
            constants,
            catalog,
            names: HashMap::new(),
        }
    }

    pub(crate) fn add_var(&mut self, def: VarDef) -> Result<VarId, BuildError> {
        let id = VarId(self.vars.len());
        if self.names.insert(def.name.clone(), id).is_some() {
            return Err(BuildError::NameCollision(def.name));
        }
        debug_assert!(def.lb <= def.ub, "{}: lb > ub", def.name);
        self.vars.push(def);
        Ok(id)
    }

    pub(crate) fn binary(&mut self, name: String) -> Result<VarId, BuildError> {
        self.add_var(VarDef {
            name,
            integer: true,
            lb: 0.0,
            ub: 1.0,
        })
    }

    pub(crate) fn fixed_binary(&mut self, name: String, value: bool) -> Result<VarId, BuildError> {
        let v = if value { 1.0 } else { 0.0 };
        self.add_var(VarDef {
            name,
            integer: true,
            lb: v,
            ub: v,
        })
    }

    pub(crate) fn continuous(&mut self, name: String, lb: f64, ub: f64) -> Result<VarId, BuildError> {
        self.add_var(VarDef {
            name,
            integer: false,
            lb,
            ub,
        })
    }

    pub(crate) fn push_row(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn var(&self, id: VarId) -> &VarDef {
        &self.vars[id.0]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_integers(&self) -> usize {
        self.vars.iter().filter(|v| v.integer).count()
    }

    /// Objective value at a full assignment.
    pub fn objective_at(&self, values: &[f64]) -> f64 {
        self.objective_offset
            + self
                .objective
                .iter()
                .map(|(v, c)| c * values[v.0])
                .sum::<f64>()
    }

    /// Families present among the rows, for formulation-shape checks.
    pub fn families(&self) -> std::collections::BTreeSet<Family> {
        self.rows.iter().map(|r| r.tag.family()).collect()
    }

    /// Interval-arithmetic certificate that every big-M row stays valid
    /// when its indicators deactivate it: under `relaxed_when`, the
    /// worst-case left-hand side over the variable box must satisfy the
    /// row. Returns offending row names.
    pub fn check_big_m_sufficiency(&self) -> Vec<String> {
        let mut bad = Vec::new();
        for row in &self.rows {
            if row.relaxed_when.is_empty() {
                continue;
            }
            let fixed: HashMap<VarId, f64> = row.relaxed_when.iter().copied().collect();
            let mut worst = 0.0; // worst-case lhs toward violating the sense
            for (v, c) in &row.terms {
                let (lb, ub) = match fixed.get(v) {
                    Some(x) => (*x, *x),
                    None => (self.vars[v.0].lb, self.vars[v.0].ub),
                };
                worst += match row.sense {
                    Sense::Le => {
                        if *c >= 0.0 {
                            c * ub
                        } else {
                            c * lb
                        }
                    }
                    Sense::Ge => {
                        if *c >= 0.0 {
                            c * lb
                        } else {
                            c * ub
                        }
                    }
                    Sense::Eq => unreachable!("equality rows carry no relaxation"),
                };
            }
            let ok = match row.sense {
                Sense::Le => worst < row.rhs + 1e-9,
                Sense::Ge => worst > row.rhs - 1e-9,
                Sense::Eq => true,
            };
            if !ok {
                bad.push(row.name.clone());
            }
        }
        bad
    }

    /// No row may multiply two decision variables; rows are linear by
    /// construction, so this asserts no duplicated variable entries that
    /// would hint at a bad expansion.
    pub fn check_no_duplicate_terms(&self) -> Vec<String> {
        let mut bad = Vec::new();
        for row in &self.rows {
            let mut seen = std::collections::HashSet::new();
            if row.terms.iter().any(|(v, _)| !seen.insert(*v)) {
                bad.push(row.name.clone());
            }
        }
        bad
    }
}

/// LP-format-safe identifier piece: anything outside [A-Za-z0-9_.] is
/// replaced.
pub fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// A final-status coefficient: a variable for switchable elements still
/// holding a decision, a constant for everything already determined.
#[derive(Debug, Clone, Copy)]
pub enum LineStatusTerm {
    Fixed(f64),
    Var(VarId),
}

impl LineStatusTerm {
    pub fn value_at(&self, values: &[f64]) -> f64 {
        match self {
            LineStatusTerm::Fixed(v) => *v,
            LineStatusTerm::Var(id) => values[id.0],
        }
    }
}

impl VarCatalog {
    pub fn line_status(&self, line: LineIdx) -> LineStatusTerm {
        self.line_final[line.idx()]
    }

    pub fn master_dg_var(&self, bus: BusIdx) -> Option<VarId> {
        self.master_dg.get(&bus.idx()).copied()
    }
}
