//! Static network model: buses, lines, switches, zones, DGs, patrol zones,
//! crews and the travel-time matrix. Immutable after load, safe to share
//! across concurrent solves.

mod io;
mod validate;

pub use io::{load_network, load_network_str, NetError};
pub use validate::{bus_reachable_all_closed, validate_network, Rule, ValidationReport};

use std::collections::BTreeMap;

use crate::units::squared_pu;

macro_rules! index_type {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub usize);

        impl $name {
            pub fn idx(self) -> usize {
                self.0
            }
        }
    };
}

index_type!(BusIdx);
index_type!(LineIdx);
index_type!(SwitchIdx);
index_type!(ZoneIdx);
index_type!(DgIdx);
index_type!(PatrolZoneIdx);
index_type!(PointIdx);
index_type!(CrewIdx);

#[derive(Debug, Clone)]
pub struct Bus {
    pub id: String,
    pub zone: ZoneIdx,
    /// Active demand, kW. Non-negative.
    pub demand_p: f64,
    /// Reactive demand, kvar.
    pub demand_q: f64,
    pub is_substation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchKind {
    /// Manual switch: a crew must be on site, takes `ms_op_time` minutes.
    Ms,
    /// Remote-controlled switch: operates instantly, no crew involved.
    Rcs,
}

#[derive(Debug, Clone)]
pub struct Line {
    pub id: String,
    pub from: BusIdx,
    pub to: BusIdx,
    /// Per-unit resistance on the declared base.
    pub r: f64,
    /// Per-unit reactance on the declared base.
    pub x: f64,
    /// Apparent-power style limit applied per component, kVA.
    pub flow_limit: f64,
    pub switch: Option<SwitchIdx>,
}

#[derive(Debug, Clone)]
pub struct Switch {
    pub id: String,
    pub kind: SwitchKind,
    pub line: LineIdx,
    pub initially_closed: bool,
    /// Routing point a crew must reach to operate an MS. None for RCS.
    pub location: Option<PointIdx>,
    /// Manual operation time in minutes. None for RCS.
    pub ms_op_time: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Zone {
    pub id: String,
    pub buses: Vec<BusIdx>,
    /// Total active demand of member buses, kW. Derived at load.
    pub load_p: f64,
    /// Outage cost rate, $/kWh.
    pub outage_cost_rate: f64,
}

#[derive(Debug, Clone)]
pub struct Dg {
    pub id: String,
    pub bus: BusIdx,
    pub p_max: f64,
    pub p_min: f64,
    pub q_max: f64,
    pub q_min: f64,
}

#[derive(Debug, Clone)]
pub struct Equipment {
    pub id: String,
    pub repair_time: f64,
    pub failure_prob: f64,
}

#[derive(Debug, Clone)]
pub struct PatrolZone {
    pub id: String,
    pub electrical_zones: Vec<ZoneIdx>,
    /// Routing point where the patrol task is anchored.
    pub location: PointIdx,
    pub patrol_time: f64,
    pub equipment: Vec<Equipment>,
    /// MSs a crew can open while patrolling this area. Each MS belongs to
    /// exactly one patrol zone network-wide.
    pub boundary_ms: Vec<SwitchIdx>,
}

#[derive(Debug, Clone)]
pub struct Crew {
    pub id: String,
    pub start: PointIdx,
}

/// Dense symmetric travel-time matrix over named routing points, minutes.
/// No path computation happens here; entries are input data.
/// The triangle inequality is not required and not checked.
#[derive(Debug, Clone)]
pub struct TravelMatrix {
    pub point_ids: Vec<String>,
    pub minutes: Vec<Vec<f64>>,
}

impl TravelMatrix {
    pub fn between(&self, a: PointIdx, b: PointIdx) -> f64 {
        self.minutes[a.idx()][b.idx()]
    }

    pub fn point(&self, id: &str) -> Option<PointIdx> {
        self.point_ids.iter().position(|p| p == id).map(PointIdx)
    }

    pub fn len(&self) -> usize {
        self.point_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_ids.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub switches: Vec<Switch>,
    pub zones: Vec<Zone>,
    pub dgs: Vec<Dg>,
    pub patrol_zones: Vec<PatrolZone>,
    pub crews: Vec<Crew>,
    pub travel: TravelMatrix,
    /// Squared per-unit voltage bounds.
    pub v_min_sq: f64,
    pub v_max_sq: f64,
    /// Declared power base, kVA.
    pub base_kva: f64,
    /// Crew travel cost rate, $/hour.
    pub travel_cost_rate: f64,
}

/// Switches separating a pair of adjacent zones, split by kind.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BoundarySwitches {
    pub ms: Vec<SwitchIdx>,
    pub rcs: Vec<SwitchIdx>,
}

impl Network {
    pub fn bus(&self, id: &str) -> Option<BusIdx> {
        self.buses.iter().position(|b| b.id == id).map(BusIdx)
    }

    pub fn zone(&self, id: &str) -> Option<ZoneIdx> {
        self.zones.iter().position(|z| z.id == id).map(ZoneIdx)
    }

    pub fn switch(&self, id: &str) -> Option<SwitchIdx> {
        self.switches.iter().position(|s| s.id == id).map(SwitchIdx)
    }

    pub fn patrol_zone(&self, id: &str) -> Option<PatrolZoneIdx> {
        self.patrol_zones
            .iter()
            .position(|q| q.id == id)
            .map(PatrolZoneIdx)
    }

    pub fn crew(&self, id: &str) -> Option<CrewIdx> {
        self.crews.iter().position(|c| c.id == id).map(CrewIdx)
    }

    pub fn zone_of_bus(&self, bus: BusIdx) -> ZoneIdx {
        self.buses[bus.idx()].zone
    }

    /// The patrol zone whose area covers an electrical zone, where unique.
    pub fn patrol_zone_of(&self, zone: ZoneIdx) -> Option<PatrolZoneIdx> {
        let mut found = None;
        for (i, pz) in self.patrol_zones.iter().enumerate() {
            if pz.electrical_zones.contains(&zone) {
                if found.is_some() {
                    return None;
                }
                found = Some(PatrolZoneIdx(i));
            }
        }
        found
    }

    /// The patrol zone that owns an MS for during-patrol operation.
    pub fn owning_patrol_zone(&self, ms: SwitchIdx) -> Option<PatrolZoneIdx> {
        self.patrol_zones
            .iter()
            .position(|pz| pz.boundary_ms.contains(&ms))
            .map(PatrolZoneIdx)
    }

    /// Zones on each side of a switch's line. Equal zones mean the switch
    /// is buried inside a zone, which `zone_adjacency` rejects.
    pub fn switch_zones(&self, sw: SwitchIdx) -> (ZoneIdx, ZoneIdx) {
        let line = &self.lines[self.switches[sw.idx()].line.idx()];
        (self.zone_of_bus(line.from), self.zone_of_bus(line.to))
    }

    pub fn total_demand_p(&self) -> f64 {
        self.buses.iter().map(|b| b.demand_p).sum()
    }

    pub fn substation_buses(&self) -> Vec<BusIdx> {
        (0..self.buses.len())
            .map(BusIdx)
            .filter(|b| self.buses[b.idx()].is_substation)
            .collect()
    }

    pub fn dgs_at(&self, bus: BusIdx) -> Vec<DgIdx> {
        (0..self.dgs.len())
            .map(DgIdx)
            .filter(|d| self.dgs[d.idx()].bus == bus)
            .collect()
    }

    pub fn squared_voltage_bounds(v_min_pu: f64, v_max_pu: f64) -> (f64, f64) {
        (squared_pu(v_min_pu), squared_pu(v_max_pu))
    }
}

/// Map each unordered pair of adjacent zones to the switches on their
/// boundary. Every switch whose line endpoints lie in different zones
/// appears in exactly one entry; a switch buried inside a single zone is
/// an inconsistency.
pub fn zone_adjacency(
    net: &Network,
) -> Result<BTreeMap<(ZoneIdx, ZoneIdx), BoundarySwitches>, NetError> {
    let mut map: BTreeMap<(ZoneIdx, ZoneIdx), BoundarySwitches> = BTreeMap::new();
    for (i, sw) in net.switches.iter().enumerate() {
        let (za, zb) = net.switch_zones(SwitchIdx(i));
        if za == zb {
            return Err(NetError::IntraZoneSwitch {
                switch: sw.id.clone(),
                zone: net.zones[za.idx()].id.clone(),
            });
        }
        let key = if za < zb { (za, zb) } else { (zb, za) };
        let entry = map.entry(key).or_default();
        match sw.kind {
            SwitchKind::Ms => entry.ms.push(SwitchIdx(i)),
            SwitchKind::Rcs => entry.rcs.push(SwitchIdx(i)),
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn two_zones_one_ms() {
        let net = synth::two_zone_net();
        let adj = zone_adjacency(&net).unwrap();
        assert_eq!(adj.len(), 1);
        let bs = adj.values().next().unwrap();
        assert_eq!(bs.ms.len(), 1);
        assert!(bs.rcs.is_empty());
    }

    #[test]
    fn multi_switch_pair_listed_together() {
        let net = synth::two_zone_two_switch_net();
        let adj = zone_adjacency(&net).unwrap();
        assert_eq!(adj.len(), 1);
        let bs = adj.values().next().unwrap();
        assert_eq!(bs.ms.len(), 1);
        assert_eq!(bs.rcs.len(), 1);
    }

    #[test]
    fn desk_net_boundary_counts() {
        let net = synth::desk13_net();
        let adj = zone_adjacency(&net).unwrap();
        let ms: usize = adj.values().map(|b| b.ms.len()).sum();
        let rcs: usize = adj.values().map(|b| b.rcs.len()).sum();
        assert_eq!(net.zones.len(), 13);
        assert_eq!(ms, 6);
        assert_eq!(rcs, 7);
    }

    #[test]
    fn zone_load_matches_member_demand() {
        let net = synth::desk13_net();
        for z in &net.zones {
            let sum: f64 = z.buses.iter().map(|b| net.buses[b.idx()].demand_p).sum();
            assert_eq!(z.load_p, sum);
        }
    }

    #[test]
    fn adjacency_covers_every_boundary_switch() {
        let net = synth::desk13_net();
        let adj = zone_adjacency(&net).unwrap();
        let total: usize = adj.values().map(|b| b.ms.len() + b.rcs.len()).sum();
        assert_eq!(total, net.switches.len());
        for ((za, zb), bs) in &adj {
            assert!(za < zb);
            for s in bs.ms.iter().chain(bs.rcs.iter()) {
                let (a, b) = net.switch_zones(*s);
                let key = if a < b { (a, b) } else { (b, a) };
                assert_eq!(key, (*za, *zb));
            }
        }
    }
}
