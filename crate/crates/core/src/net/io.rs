//! Network file ingestion. UTF-8 JSON with top-level keys `buses`,
//! `lines`, `switches`, `zones`, `dgs`, `patrol_zones`, `crews`, `points`,
//! `travel_min` plus voltage limits, base and travel rate. Times are
//! minutes, powers kW/kvar, impedances per-unit on `base_kva`. The exact
//! field names are fixed by the golden tests next to the fixtures.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::{
    Bus, BusIdx, Crew, Dg, Equipment, Line, LineIdx, Network, PatrolZone, PointIdx, Switch,
    SwitchIdx, SwitchKind, TravelMatrix, Zone, ZoneIdx,
};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{context}: unknown {kind} {id:?}")]
    DanglingRef {
        context: String,
        kind: &'static str,
        id: String,
    },
    #[error("{context}: {message}")]
    Invalid { context: String, message: String },
    #[error("switch {switch} lies inside zone {zone}; boundary switches must join two zones")]
    IntraZoneSwitch { switch: String, zone: String },
}

fn invalid(context: impl Into<String>, message: impl Into<String>) -> NetError {
    NetError::Invalid {
        context: context.into(),
        message: message.into(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    base_kva: f64,
    v_min_pu: f64,
    v_max_pu: f64,
    travel_cost_per_hour: f64,
    buses: Vec<BusRec>,
    lines: Vec<LineRec>,
    switches: Vec<SwitchRec>,
    zones: Vec<ZoneRec>,
    #[serde(default)]
    dgs: Vec<DgRec>,
    patrol_zones: Vec<PatrolZoneRec>,
    crews: Vec<CrewRec>,
    points: Vec<String>,
    travel_min: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BusRec {
    id: String,
    demand_p_kw: f64,
    #[serde(default)]
    demand_q_kvar: f64,
    #[serde(default)]
    substation: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LineRec {
    id: String,
    from: String,
    to: String,
    r_pu: f64,
    x_pu: f64,
    flow_limit_kva: f64,
    #[serde(default)]
    switch: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SwitchRec {
    id: String,
    kind: String,
    line: String,
    initially_closed: bool,
    #[serde(default)]
    location: Option<String>,
    #[serde(default)]
    op_time_min: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ZoneRec {
    id: String,
    buses: Vec<String>,
    outage_cost_per_kwh: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DgRec {
    id: String,
    bus: String,
    p_max_kw: f64,
    p_min_kw: f64,
    q_max_kvar: f64,
    q_min_kvar: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EquipmentRec {
    id: String,
    repair_min: f64,
    failure_prob: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PatrolZoneRec {
    id: String,
    zones: Vec<String>,
    location: String,
    patrol_min: f64,
    #[serde(default)]
    equipment: Vec<EquipmentRec>,
    #[serde(default)]
    boundary_ms: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CrewRec {
    id: String,
    start: String,
}

fn check_unique<'a>(kind: &'static str, ids: impl Iterator<Item = &'a str>) -> Result<(), NetError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(NetError::DuplicateId {
                kind,
                id: id.to_string(),
            });
        }
    }
    Ok(())
}

pub fn load_network(path: &Path) -> Result<Network, NetError> {
    let text = std::fs::read_to_string(path).map_err(|source| NetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_network_str(&text)
}

/// Parse and cross-link a network document. All id references are
/// resolved here; structural invariants beyond reference integrity are
/// the business of `validate_network`.
pub fn load_network_str(text: &str) -> Result<Network, NetError> {
    let file: NetworkFile = serde_json::from_str(text)?;

    check_unique("bus", file.buses.iter().map(|b| b.id.as_str()))?;
    check_unique("line", file.lines.iter().map(|l| l.id.as_str()))?;
    check_unique("switch", file.switches.iter().map(|s| s.id.as_str()))?;
    check_unique("zone", file.zones.iter().map(|z| z.id.as_str()))?;
    check_unique("dg", file.dgs.iter().map(|d| d.id.as_str()))?;
    check_unique("patrol zone", file.patrol_zones.iter().map(|q| q.id.as_str()))?;
    check_unique("crew", file.crews.iter().map(|c| c.id.as_str()))?;
    check_unique("point", file.points.iter().map(|p| p.as_str()))?;

    if file.base_kva <= 0.0 {
        return Err(invalid("limits", "base_kva must be positive"));
    }
    if !(file.v_min_pu > 0.0 && file.v_min_pu < file.v_max_pu) {
        return Err(invalid("limits", "need 0 < v_min_pu < v_max_pu"));
    }

    let travel = TravelMatrix {
        point_ids: file.points.clone(),
        minutes: file.travel_min.clone(),
    };
    let n = travel.point_ids.len();
    if travel.minutes.len() != n || travel.minutes.iter().any(|row| row.len() != n) {
        return Err(invalid(
            "travel_min",
            format!("matrix must be {n}x{n} to match points"),
        ));
    }

    let bus_idx = |context: &str, id: &str| -> Result<BusIdx, NetError> {
        file.buses
            .iter()
            .position(|b| b.id == id)
            .map(BusIdx)
            .ok_or_else(|| NetError::DanglingRef {
                context: context.to_string(),
                kind: "bus",
                id: id.to_string(),
            })
    };
    let point_idx = |context: &str, id: &str| -> Result<PointIdx, NetError> {
        travel.point(id).ok_or_else(|| NetError::DanglingRef {
            context: context.to_string(),
            kind: "point",
            id: id.to_string(),
        })
    };

    // Zones first: bus->zone assignment is derived from zone membership.
    let mut bus_zone: Vec<Option<ZoneIdx>> = vec![None; file.buses.len()];
    let mut zones = Vec::new();
    for (zi, z) in file.zones.iter().enumerate() {
        let mut members = Vec::new();
        let mut load_p = 0.0;
        for bid in &z.buses {
            let b = bus_idx(&format!("zone {}", z.id), bid)?;
            // First assignment wins; duplicates surface in validation.
            if bus_zone[b.idx()].is_none() {
                bus_zone[b.idx()] = Some(ZoneIdx(zi));
            }
            members.push(b);
            load_p += file.buses[b.idx()].demand_p_kw;
        }
        zones.push(Zone {
            id: z.id.clone(),
            buses: members,
            load_p,
            outage_cost_rate: z.outage_cost_per_kwh,
        });
    }

    let mut buses = Vec::new();
    for (bi, b) in file.buses.iter().enumerate() {
        let zone = bus_zone[bi].ok_or_else(|| {
            invalid(format!("bus {}", b.id), "bus belongs to no zone")
        })?;
        if b.demand_p_kw < 0.0 {
            return Err(invalid(format!("bus {}", b.id), "demand_p_kw must be >= 0"));
        }
        buses.push(Bus {
            id: b.id.clone(),
            zone,
            demand_p: b.demand_p_kw,
            demand_q: b.demand_q_kvar,
            is_substation: b.substation,
        });
    }

    let mut switches = Vec::new();
    for s in &file.switches {
        let kind = match s.kind.as_str() {
            "ms" => SwitchKind::Ms,
            "rcs" => SwitchKind::Rcs,
            other => {
                return Err(invalid(
                    format!("switch {}", s.id),
                    format!("unknown kind {other:?}, expected \"ms\" or \"rcs\""),
                ))
            }
        };
        let line = file
            .lines
            .iter()
            .position(|l| l.id == s.line)
            .map(LineIdx)
            .ok_or_else(|| NetError::DanglingRef {
                context: format!("switch {}", s.id),
                kind: "line",
                id: s.line.clone(),
            })?;
        let (location, ms_op_time) = match kind {
            SwitchKind::Ms => {
                let loc = s.location.as_deref().ok_or_else(|| {
                    invalid(format!("switch {}", s.id), "an MS needs a location point")
                })?;
                let op = s.op_time_min.ok_or_else(|| {
                    invalid(format!("switch {}", s.id), "an MS needs op_time_min")
                })?;
                if op <= 0.0 {
                    return Err(invalid(format!("switch {}", s.id), "op_time_min must be > 0"));
                }
                (Some(point_idx(&format!("switch {}", s.id), loc)?), Some(op))
            }
            SwitchKind::Rcs => {
                if s.op_time_min.is_some() || s.location.is_some() {
                    return Err(invalid(
                        format!("switch {}", s.id),
                        "an RCS has no manual operation time or location",
                    ));
                }
                (None, None)
            }
        };
        switches.push(Switch {
            id: s.id.clone(),
            kind,
            line,
            initially_closed: s.initially_closed,
            location,
            ms_op_time,
        });
    }

    let mut lines = Vec::new();
    for (li, l) in file.lines.iter().enumerate() {
        if l.r_pu < 0.0 || l.x_pu < 0.0 {
            return Err(invalid(format!("line {}", l.id), "r_pu and x_pu must be >= 0"));
        }
        if l.flow_limit_kva <= 0.0 {
            return Err(invalid(format!("line {}", l.id), "flow_limit_kva must be > 0"));
        }
        let switch = match &l.switch {
            Some(sid) => {
                let s = switches
                    .iter()
                    .position(|s| &s.id == sid)
                    .map(SwitchIdx)
                    .ok_or_else(|| NetError::DanglingRef {
                        context: format!("line {}", l.id),
                        kind: "switch",
                        id: sid.clone(),
                    })?;
                if switches[s.idx()].line.idx() != li {
                    return Err(invalid(
                        format!("line {}", l.id),
                        format!("switch {sid} does not point back at this line"),
                    ));
                }
                Some(s)
            }
            None => None,
        };
        lines.push(Line {
            id: l.id.clone(),
            from: bus_idx(&format!("line {}", l.id), &l.from)?,
            to: bus_idx(&format!("line {}", l.id), &l.to)?,
            r: l.r_pu,
            x: l.x_pu,
            flow_limit: l.flow_limit_kva,
            switch,
        });
    }
    // A switch must be referenced by exactly the line it names.
    for (si, s) in switches.iter().enumerate() {
        if lines[s.line.idx()].switch != Some(SwitchIdx(si)) {
            return Err(invalid(
                format!("switch {}", s.id),
                format!("line {} does not reference this switch", lines[s.line.idx()].id),
            ));
        }
    }

    let mut dgs = Vec::new();
    for d in &file.dgs {
        if d.p_min_kw > d.p_max_kw || d.q_min_kvar > d.q_max_kvar {
            return Err(invalid(format!("dg {}", d.id), "min bound exceeds max bound"));
        }
        dgs.push(Dg {
            id: d.id.clone(),
            bus: bus_idx(&format!("dg {}", d.id), &d.bus)?,
            p_max: d.p_max_kw,
            p_min: d.p_min_kw,
            q_max: d.q_max_kvar,
            q_min: d.q_min_kvar,
        });
    }

    let mut patrol_zones = Vec::new();
    for q in &file.patrol_zones {
        if q.patrol_min <= 0.0 {
            return Err(invalid(format!("patrol zone {}", q.id), "patrol_min must be > 0"));
        }
        let mut ezones = Vec::new();
        for zid in &q.zones {
            let z = zones
                .iter()
                .position(|z| &z.id == zid)
                .map(ZoneIdx)
                .ok_or_else(|| NetError::DanglingRef {
                    context: format!("patrol zone {}", q.id),
                    kind: "zone",
                    id: zid.clone(),
                })?;
            ezones.push(z);
        }
        let mut equipment = Vec::new();
        for e in &q.equipment {
            if !(0.0..=1.0).contains(&e.failure_prob) {
                return Err(invalid(
                    format!("patrol zone {} equipment {}", q.id, e.id),
                    "failure_prob must lie in [0, 1]",
                ));
            }
            equipment.push(Equipment {
                id: e.id.clone(),
                repair_time: e.repair_min,
                failure_prob: e.failure_prob,
            });
        }
        let mut boundary = Vec::new();
        for sid in &q.boundary_ms {
            let s = switches
                .iter()
                .position(|s| &s.id == sid)
                .map(SwitchIdx)
                .ok_or_else(|| NetError::DanglingRef {
                    context: format!("patrol zone {}", q.id),
                    kind: "switch",
                    id: sid.clone(),
                })?;
            if switches[s.idx()].kind != SwitchKind::Ms {
                return Err(invalid(
                    format!("patrol zone {}", q.id),
                    format!("boundary switch {sid} is not an MS"),
                ));
            }
            boundary.push(s);
        }
        patrol_zones.push(PatrolZone {
            id: q.id.clone(),
            electrical_zones: ezones,
            location: point_idx(&format!("patrol zone {}", q.id), &q.location)?,
            patrol_time: q.patrol_min,
            equipment,
            boundary_ms: boundary,
        });
    }
    // During-patrol operability must be unambiguous: one owner per MS.
    let mut owner: Vec<Option<usize>> = vec![None; switches.len()];
    for (qi, q) in patrol_zones.iter().enumerate() {
        for s in &q.boundary_ms {
            if let Some(prev) = owner[s.idx()] {
                return Err(invalid(
                    format!("patrol zone {}", q.id),
                    format!(
                        "MS {} already owned by patrol zone {}",
                        switches[s.idx()].id,
                        patrol_zones[prev].id
                    ),
                ));
            }
            owner[s.idx()] = Some(qi);
        }
    }

    let mut crews = Vec::new();
    for c in &file.crews {
        crews.push(Crew {
            id: c.id.clone(),
            start: point_idx(&format!("crew {}", c.id), &c.start)?,
        });
    }
    if crews.is_empty() {
        return Err(invalid("crews", "at least one crew is required"));
    }

    let (v_min_sq, v_max_sq) = Network::squared_voltage_bounds(file.v_min_pu, file.v_max_pu);
    Ok(Network {
        buses,
        lines,
        switches,
        zones,
        dgs,
        patrol_zones,
        crews,
        travel,
        v_min_sq,
        v_max_sq,
        base_kva: file.base_kva,
        travel_cost_rate: file.travel_cost_per_hour,
    })
}
