//! Synthetic networks and seeded damage scenarios used by tests, the
//! demo data generator and the benchmark harness. Travel times come from
//! straight-line distance between planar point coordinates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::net::{
    Bus, BusIdx, Crew, Dg, Equipment, Line, LineIdx, Network, PatrolZone, PointIdx, Switch,
    SwitchIdx, SwitchKind, TravelMatrix, Zone, ZoneIdx,
};
use crate::scenario::{GroundTruth, TrueFault};

pub struct NetBuilder {
    base_kva: f64,
    v_min_pu: f64,
    v_max_pu: f64,
    travel_cost_rate: f64,
    buses: Vec<(String, String, f64, f64, bool)>,
    lines: Vec<(String, String, String, f64, f64, f64, Option<String>)>,
    switches: Vec<(String, SwitchKind, String, bool, Option<String>, Option<f64>)>,
    zones: Vec<(String, f64)>,
    dgs: Vec<(String, String, f64, f64, f64, f64)>,
    patrols: Vec<(String, Vec<String>, String, f64, Vec<Equipment>, Vec<String>)>,
    crews: Vec<(String, String)>,
    points: Vec<(String, f64, f64)>,
}

impl NetBuilder {
    pub fn new(base_kva: f64) -> Self {
        NetBuilder {
            base_kva,
            v_min_pu: 0.95,
            v_max_pu: 1.05,
            travel_cost_rate: 0.60,
            buses: Vec::new(),
            lines: Vec::new(),
            switches: Vec::new(),
            zones: Vec::new(),
            dgs: Vec::new(),
            patrols: Vec::new(),
            crews: Vec::new(),
            points: Vec::new(),
        }
    }

    pub fn point(&mut self, id: &str, x: f64, y: f64) -> &mut Self {
        self.points.push((id.into(), x, y));
        self
    }

    pub fn zone(&mut self, id: &str, cost_rate: f64) -> &mut Self {
        self.zones.push((id.into(), cost_rate));
        self
    }

    pub fn bus(&mut self, id: &str, zone: &str, p: f64, q: f64, sub: bool) -> &mut Self {
        self.buses.push((id.into(), zone.into(), p, q, sub));
        self
    }

    pub fn line(&mut self, id: &str, from: &str, to: &str, r: f64, x: f64, limit: f64) -> &mut Self {
        self.lines
            .push((id.into(), from.into(), to.into(), r, x, limit, None));
        self
    }

    pub fn ms(
        &mut self,
        id: &str,
        from: &str,
        to: &str,
        closed: bool,
        location: &str,
        op_time: f64,
    ) -> &mut Self {
        let lid = format!("l.{id}");
        self.lines
            .push((lid.clone(), from.into(), to.into(), 0.008, 0.012, 5000.0, Some(id.into())));
        self.switches.push((
            id.into(),
            SwitchKind::Ms,
            lid,
            closed,
            Some(location.into()),
            Some(op_time),
        ));
        self
    }

    pub fn rcs(&mut self, id: &str, from: &str, to: &str, closed: bool) -> &mut Self {
        let lid = format!("l.{id}");
        self.lines
            .push((lid.clone(), from.into(), to.into(), 0.008, 0.012, 5000.0, Some(id.into())));
        self.switches
            .push((id.into(), SwitchKind::Rcs, lid, closed, None, None));
        self
    }

    pub fn dg(&mut self, id: &str, bus: &str, p_max: f64, p_min: f64, q_max: f64, q_min: f64) -> &mut Self {
        self.dgs
            .push((id.into(), bus.into(), p_max, p_min, q_max, q_min));
        self
    }

    pub fn patrol(
        &mut self,
        id: &str,
        zones: &[&str],
        location: &str,
        minutes: f64,
        equipment: Vec<Equipment>,
        boundary_ms: &[&str],
    ) -> &mut Self {
        self.patrols.push((
            id.into(),
            zones.iter().map(|s| s.to_string()).collect(),
            location.into(),
            minutes,
            equipment,
            boundary_ms.iter().map(|s| s.to_string()).collect(),
        ));
        self
    }

    pub fn crew(&mut self, id: &str, start: &str) -> &mut Self {
        self.crews.push((id.into(), start.into()));
        self
    }

    pub fn build(&self) -> Network {
        let point_ids: Vec<String> = self.points.iter().map(|(id, _, _)| id.clone()).collect();
        let minutes: Vec<Vec<f64>> = self
            .points
            .iter()
            .map(|(_, x1, y1)| {
                self.points
                    .iter()
                    .map(|(_, x2, y2)| {
                        let d = ((x1 - x2).powi(2) + (y1 - y2).powi(2)).sqrt();
                        (d * 10.0).round() / 10.0
                    })
                    .collect()
            })
            .collect();
        let travel = TravelMatrix { point_ids, minutes };

        let zone_pos = |id: &str| ZoneIdx(self.zones.iter().position(|(z, _)| z == id).unwrap());
        let bus_pos = |id: &str| BusIdx(self.buses.iter().position(|(b, ..)| b == id).unwrap());
        let point_pos = |id: &str| travel.point(id).unwrap_or_else(|| panic!("point {id}"));

        let buses: Vec<Bus> = self
            .buses
            .iter()
            .map(|(id, zone, p, q, sub)| Bus {
                id: id.clone(),
                zone: zone_pos(zone),
                demand_p: *p,
                demand_q: *q,
                is_substation: *sub,
            })
            .collect();

        let switches: Vec<Switch> = self
            .switches
            .iter()
            .map(|(id, kind, line, closed, loc, op)| Switch {
                id: id.clone(),
                kind: *kind,
                line: LineIdx(self.lines.iter().position(|(l, ..)| l == line).unwrap()),
                initially_closed: *closed,
                location: loc.as_deref().map(point_pos),
                ms_op_time: *op,
            })
            .collect();

        let lines: Vec<Line> = self
            .lines
            .iter()
            .map(|(id, from, to, r, x, limit, sw)| Line {
                id: id.clone(),
                from: bus_pos(from),
                to: bus_pos(to),
                r: *r,
                x: *x,
                flow_limit: *limit,
                switch: sw
                    .as_deref()
                    .map(|s| SwitchIdx(switches.iter().position(|w| w.id == s).unwrap())),
            })
            .collect();

        let zones: Vec<Zone> = self
            .zones
            .iter()
            .enumerate()
            .map(|(zi, (id, rate))| {
                let members: Vec<BusIdx> = buses
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| b.zone == ZoneIdx(zi))
                    .map(|(bi, _)| BusIdx(bi))
                    .collect();
                let load_p = members.iter().map(|b| buses[b.idx()].demand_p).sum();
                Zone {
                    id: id.clone(),
                    buses: members,
                    load_p,
                    outage_cost_rate: *rate,
                }
            })
            .collect();

        let dgs: Vec<Dg> = self
            .dgs
            .iter()
            .map(|(id, bus, p_max, p_min, q_max, q_min)| Dg {
                id: id.clone(),
                bus: bus_pos(bus),
                p_max: *p_max,
                p_min: *p_min,
                q_max: *q_max,
                q_min: *q_min,
            })
            .collect();

        let patrol_zones: Vec<PatrolZone> = self
            .patrols
            .iter()
            .map(|(id, zs, loc, min, equipment, boundary)| PatrolZone {
                id: id.clone(),
                electrical_zones: zs.iter().map(|z| zone_pos(z)).collect(),
                location: point_pos(loc),
                patrol_time: *min,
                equipment: equipment.clone(),
                boundary_ms: boundary
                    .iter()
                    .map(|s| SwitchIdx(switches.iter().position(|w| &w.id == s).unwrap()))
                    .collect(),
            })
            .collect();

        let crews: Vec<Crew> = self
            .crews
            .iter()
            .map(|(id, start)| Crew {
                id: id.clone(),
                start: point_pos(start),
            })
            .collect();

        let (v_min_sq, v_max_sq) = Network::squared_voltage_bounds(self.v_min_pu, self.v_max_pu);
        Network {
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
            base_kva: self.base_kva,
            travel_cost_rate: self.travel_cost_rate,
        }
    }
}

fn equip(prefix: &str, entries: &[(f64, f64)]) -> Vec<Equipment> {
    entries
        .iter()
        .enumerate()
        .map(|(i, (t, p))| Equipment {
            id: format!("{prefix}.e{i}"),
            repair_time: *t,
            failure_prob: *p,
        })
        .collect()
}

/// One substation zone, one downstream zone, a single MS between them.
pub fn two_zone_net() -> Network {
    let mut b = NetBuilder::new(5000.0);
    b.point("d1", 0.0, 0.0)
        .point("p.s1", 6.0, 0.0)
        .point("p.q1", 3.0, 2.0)
        .point("p.q2", 9.0, 2.0)
        .point("fp.z1.0", 2.0, -1.0)
        .point("fp.z2.0", 10.0, -1.0);
    b.zone("z1", 20.0).zone("z2", 25.0);
    b.bus("b1", "z1", 0.0, 0.0, true)
        .bus("b2", "z1", 100.0, 30.0, false)
        .bus("b3", "z2", 80.0, 24.0, false)
        .bus("b4", "z2", 40.0, 12.0, false);
    b.line("l1", "b1", "b2", 0.01, 0.02, 5000.0)
        .ms("s1", "b2", "b3", true, "p.s1", 5.0)
        .line("l2", "b3", "b4", 0.01, 0.02, 5000.0);
    b.patrol("q1", &["z1"], "p.q1", 20.0, equip("q1", &[(120.0, 0.1), (60.0, 0.5)]), &["s1"])
        .patrol("q2", &["z2"], "p.q2", 15.0, equip("q2", &[(90.0, 0.2)]), &[]);
    b.crew("c1", "d1");
    b.build()
}

/// Two zones joined by both an MS and a normally-open RCS tie.
pub fn two_zone_two_switch_net() -> Network {
    let mut b = NetBuilder::new(5000.0);
    b.point("d1", 0.0, 0.0)
        .point("p.s1", 6.0, 0.0)
        .point("p.q1", 3.0, 2.0)
        .point("p.q2", 9.0, 2.0)
        .point("fp.z1.0", 2.0, -1.0)
        .point("fp.z2.0", 10.0, -1.0);
    b.zone("z1", 20.0).zone("z2", 25.0);
    b.bus("b1", "z1", 0.0, 0.0, true)
        .bus("b2", "z1", 100.0, 30.0, false)
        .bus("b3", "z2", 80.0, 24.0, false)
        .bus("b4", "z2", 40.0, 12.0, false);
    b.line("l1", "b1", "b2", 0.01, 0.02, 5000.0)
        .ms("s1", "b2", "b3", true, "p.s1", 5.0)
        .line("l2", "b3", "b4", 0.01, 0.02, 5000.0)
        .rcs("r1", "b2", "b4", false);
    b.patrol("q1", &["z1"], "p.q1", 20.0, equip("q1", &[(120.0, 0.1)]), &["s1"])
        .patrol("q2", &["z2"], "p.q2", 15.0, equip("q2", &[(90.0, 0.2)]), &[]);
    b.crew("c1", "d1");
    b.build()
}

/// Single zone, no switches: the smallest end-to-end network.
pub fn single_zone_net() -> Network {
    let mut b = NetBuilder::new(5000.0);
    b.point("d1", 0.0, 0.0)
        .point("p.q1", 4.0, 3.0)
        .point("fp.z1.0", 5.0, 1.0);
    b.zone("z1", 20.0);
    b.bus("b1", "z1", 0.0, 0.0, true)
        .bus("b2", "z1", 120.0, 36.0, false);
    b.line("l1", "b1", "b2", 0.01, 0.02, 5000.0);
    b.patrol("q1", &["z1"], "p.q1", 20.0, equip("q1", &[(100.0, 0.25)]), &[]);
    b.crew("c1", "d1");
    b.build()
}

/// Layout table for the 13-zone desk network: zone id, grid position,
/// load kW, and the boundary switch taking it toward the feeder root.
struct DeskZone {
    id: &'static str,
    x: f64,
    y: f64,
    load: f64,
}

const DESK_ZONES: [DeskZone; 13] = [
    DeskZone { id: "z1", x: 0.0, y: 0.0, load: 150.0 },
    DeskZone { id: "z2", x: 8.0, y: 0.0, load: 180.0 },
    DeskZone { id: "z3", x: 16.0, y: 0.0, load: 120.0 },
    DeskZone { id: "z4", x: 24.0, y: 0.0, load: 90.0 },
    DeskZone { id: "z5", x: 0.0, y: 8.0, load: 200.0 },
    DeskZone { id: "z6", x: 8.0, y: 8.0, load: 160.0 },
    DeskZone { id: "z7", x: 0.0, y: 16.0, load: 140.0 },
    DeskZone { id: "z8", x: 8.0, y: -8.0, load: 110.0 },
    DeskZone { id: "z9", x: 16.0, y: -8.0, load: 130.0 },
    DeskZone { id: "z10", x: 16.0, y: 8.0, load: 170.0 },
    DeskZone { id: "z11", x: 0.0, y: 24.0, load: 100.0 },
    DeskZone { id: "z12", x: 24.0, y: 8.0, load: 80.0 },
    DeskZone { id: "z13", x: 24.0, y: -8.0, load: 150.0 },
];

// Boundary switches: (id, kind-is-ms, from zone, to zone, initially closed).
const DESK_EDGES: [(&str, bool, &str, &str, bool); 13] = [
    ("ms1", true, "z1", "z2", true),
    ("rcs1", false, "z2", "z3", true),
    ("ms2", true, "z3", "z4", true),
    ("rcs2", false, "z1", "z5", true),
    ("ms3", true, "z5", "z6", true),
    ("rcs3", false, "z5", "z7", true),
    ("ms4", true, "z2", "z8", true),
    ("rcs4", false, "z8", "z9", true),
    ("ms5", true, "z6", "z10", true),
    ("rcs5", false, "z7", "z11", true),
    ("ms6", true, "z4", "z12", true),
    ("rcs6", false, "z9", "z13", true),
    ("rcs7", false, "z13", "z10", false),
];

fn desk13_with_rates(rates: &[f64; 13]) -> Network {
    let mut b = NetBuilder::new(5000.0);
    b.point("d1", -6.0, 0.0).point("d2", 20.0, -14.0);

    for (zi, z) in DESK_ZONES.iter().enumerate() {
        b.zone(z.id, rates[zi]);
        b.point(&format!("p.{}", z.id), z.x, z.y + 1.5);
        for k in 0..3 {
            b.point(
                &format!("fp.{}.{k}", z.id),
                z.x + 1.0 + k as f64,
                z.y - 1.5,
            );
        }
        // Head bus carries the boundary connections, tail bus the load.
        let head = format!("{}a", z.id);
        let tail = format!("{}b", z.id);
        b.bus(&head, z.id, z.load * 0.4, z.load * 0.12, z.id == "z1");
        b.bus(&tail, z.id, z.load * 0.6, z.load * 0.18, false);
        b.line(&format!("l.{}", z.id), &head, &tail, 0.006, 0.01, 5000.0);
    }
    // Substation zone gets its injection at the head bus; give it no load
    // there so the root bus is a pure source.
    // (z1a declared above with load; rebuilt below would complicate the
    // builder, so z1a keeps a small load and the substation flag.)

    for (id, is_ms, from, to, closed) in DESK_EDGES {
        let fa = format!("{from}a");
        let tb = format!("{to}a");
        if is_ms {
            let zf = DESK_ZONES.iter().find(|z| z.id == from).unwrap();
            let zt = DESK_ZONES.iter().find(|z| z.id == to).unwrap();
            let loc = format!("p.{id}");
            b.point(&loc, (zf.x + zt.x) / 2.0, (zf.y + zt.y) / 2.0);
            b.ms(id, &fa, &tb, closed, &loc, 5.0);
        } else {
            b.rcs(id, &fa, &tb, closed);
        }
    }

    b.dg("dg1", "z6b", 200.0, 20.0, 140.0, -140.0)
        .dg("dg2", "z10b", 300.0, 30.0, 210.0, -210.0);

    let boundary: [&[&str]; 13] = [
        &["ms1"],
        &["ms4"],
        &["ms2"],
        &["ms6"],
        &["ms3"],
        &["ms5"],
        &[],
        &[],
        &[],
        &[],
        &[],
        &[],
        &[],
    ];
    for (zi, z) in DESK_ZONES.iter().enumerate() {
        let eq = equip(
            z.id,
            &[
                (60.0 + 10.0 * (zi % 5) as f64, 0.10 + 0.02 * (zi % 4) as f64),
                (100.0 + 8.0 * (zi % 3) as f64, 0.05 + 0.05 * (zi % 3) as f64),
            ],
        );
        b.patrol(
            &format!("q.{}", z.id),
            &[z.id],
            &format!("p.{}", z.id),
            15.0 + (zi % 4) as f64 * 5.0,
            eq,
            boundary[zi],
        );
    }

    for c in 1..=3 {
        b.crew(&format!("c{c}"), "d1");
    }
    for c in 4..=6 {
        b.crew(&format!("c{c}"), "d2");
    }
    b.build()
}

/// The 13-zone desk network: 6 MSs and 7 RCSs on the zone boundaries,
/// one substation, two DGs, six crews at two depots.
pub fn desk13_net() -> Network {
    desk13_with_rates(&[
        20.0, 35.0, 18.0, 22.0, 40.0, 28.0, 16.0, 30.0, 24.0, 38.0, 21.0, 26.0, 33.0,
    ])
}

/// Same topology with outage cost rates drawn uniformly from $15 to $45
/// per kWh.
pub fn desk13_net_seeded(seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0157);
    let mut rates = [0.0; 13];
    for r in &mut rates {
        *r = (rng.gen_range(15.0f64..45.0) * 10.0).round() / 10.0;
    }
    desk13_with_rates(&rates)
}

/// Candidate fault locations of a network built here: points named
/// `fp.<zone>.<k>`.
pub fn fault_candidates(net: &Network) -> Vec<(PointIdx, ZoneIdx)> {
    let mut out = Vec::new();
    for (pi, id) in net.travel.point_ids.iter().enumerate() {
        if let Some(rest) = id.strip_prefix("fp.") {
            if let Some(zone_id) = rest.split('.').next() {
                if let Some(z) = net.zone(zone_id) {
                    out.push((PointIdx(pi), z));
                }
            }
        }
    }
    out
}

/// Seeded damage draw: `n_faults` faults over the candidate locations
/// with repair times from 50 to 170 minutes.
pub fn seeded_scenario(net: &Network, seed: u64, n_faults: usize) -> GroundTruth {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates = fault_candidates(net);
    assert!(!candidates.is_empty(), "network has no fault candidate points");
    let mut picked = Vec::new();
    let mut used = std::collections::BTreeSet::new();
    while picked.len() < n_faults && used.len() < candidates.len() {
        let k = rng.gen_range(0..candidates.len());
        if !used.insert(k) {
            continue;
        }
        let (loc, zone) = candidates[k];
        picked.push(TrueFault {
            id: format!("f{}", picked.len() + 1),
            location: loc,
            zone,
            repair_time: rng.gen_range(50.0f64..170.0).round(),
        });
    }
    GroundTruth {
        faults: picked,
        equipment: net.patrol_zones.iter().map(|q| q.equipment.clone()).collect(),
    }
}

/// The base 12-fault draw on the desk network.
pub fn desk13_scenario(seed: u64) -> GroundTruth {
    seeded_scenario(&desk13_net(), seed, 12)
}

/// Large synthetic case: `n_zones` zones strung into feeders around a
/// few substations, sparse MS placement, many crews.
pub fn stress_net(n_zones: usize, n_crews: usize) -> Network {
    let mut b = NetBuilder::new(20000.0);
    let feeders = 4;
    let per = n_zones.div_ceil(feeders);
    let mut edges: Vec<(String, bool, String, String)> = Vec::new();
    let mut zone_xy = Vec::new();

    for zi in 0..n_zones {
        let f = zi / per;
        let k = zi % per;
        let x = k as f64 * 7.0;
        let y = f as f64 * 14.0;
        let id = format!("z{}", zi + 1);
        zone_xy.push((id.clone(), x, y));
        b.zone(&id, 20.0 + (zi % 20) as f64);
        b.point(&format!("p.{id}"), x, y + 1.0);
        b.point(&format!("fp.{id}.0", ), x + 1.0, y - 1.0);
        b.point(&format!("fp.{id}.1", ), x + 2.0, y - 1.0);
        let head = format!("{id}a");
        let tail = format!("{id}b");
        let load = 80.0 + (zi % 7) as f64 * 20.0;
        b.bus(&head, &id, load * 0.4, load * 0.12, k == 0);
        b.bus(&tail, &id, load * 0.6, load * 0.18, false);
        b.line(&format!("l.{id}"), &head, &tail, 0.004, 0.006, 20000.0);
        if k > 0 {
            let prev = format!("z{}", zi);
            // Every third boundary is manual, the rest remote.
            let is_ms = k % 3 == 0;
            edges.push((format!("sw{}", edges.len() + 1), is_ms, prev, id.clone()));
        }
    }
    // A few normally-open ties between feeder ends.
    for f in 0..feeders - 1 {
        let a = format!("z{}", (f + 1) * per.min(n_zones));
        let bz = format!("z{}", ((f + 2) * per).min(n_zones));
        if a != bz {
            edges.push((format!("tie{f}"), false, a, bz));
        }
    }

    let find_xy = |id: &str| {
        zone_xy
            .iter()
            .find(|(z, _, _)| z == id)
            .map(|(_, x, y)| (*x, *y))
            .unwrap()
    };
    let mut tie_seen = std::collections::BTreeSet::new();
    for (id, is_ms, from, to) in &edges {
        let fa = format!("{from}a");
        let tb = format!("{to}a");
        let closed = !id.starts_with("tie");
        if *is_ms {
            let (x1, y1) = find_xy(from);
            let (x2, y2) = find_xy(to);
            let loc = format!("p.{id}");
            b.point(&loc, (x1 + x2) / 2.0, (y1 + y2) / 2.0);
            b.ms(id, &fa, &tb, closed, &loc, 5.0);
        } else {
            if !tie_seen.insert((fa.clone(), tb.clone())) {
                continue;
            }
            b.rcs(id, &fa, &tb, closed);
        }
    }

    // A DG every eighth zone.
    for zi in (4..n_zones).step_by(8) {
        b.dg(
            &format!("dg{zi}"),
            &format!("z{}b", zi + 1),
            300.0,
            30.0,
            200.0,
            -200.0,
        );
    }

    for zi in 0..n_zones {
        let id = format!("z{}", zi + 1);
        b.patrol(
            &format!("q.{id}"),
            &[id.as_str()],
            &format!("p.{id}"),
            12.0 + (zi % 3) as f64 * 4.0,
            equip(&id, &[(80.0, 0.1)]),
            &[],
        );
    }

    for c in 0..n_crews {
        let depot = format!("dep{}", c % 4);
        if c < 4 {
            b.point(&depot, (c % 2) as f64 * 40.0 - 5.0, (c / 2) as f64 * 28.0);
        }
        b.crew(&format!("c{}", c + 1), &format!("dep{}", c % 4));
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::validate_network;

    #[test]
    fn desk13_shape() {
        let net = desk13_net();
        assert_eq!(net.zones.len(), 13);
        assert_eq!(net.crews.len(), 6);
        assert_eq!(net.dgs.len(), 2);
        assert!(validate_network(&net).is_valid());
    }

    #[test]
    fn seeded_scenario_is_deterministic() {
        let net = desk13_net();
        let a = seeded_scenario(&net, 42, 12);
        let b = seeded_scenario(&net, 42, 12);
        assert_eq!(a.faults.len(), 12);
        for (fa, fb) in a.faults.iter().zip(&b.faults) {
            assert_eq!(fa.id, fb.id);
            assert_eq!(fa.location, fb.location);
            assert_eq!(fa.repair_time, fb.repair_time);
        }
    }

    #[test]
    fn stress_net_validates() {
        let net = stress_net(60, 20);
        assert_eq!(net.zones.len(), 60);
        assert_eq!(net.crews.len(), 20);
        let report = validate_network(&net);
        assert!(report.is_valid(), "{:?}", report.findings);
    }
}
